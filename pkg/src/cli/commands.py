"""
명령행 인터페이스

    emss pretrain   -c cfg.yaml [--out DIR]
    emss finetune   -c cfg.yaml [--out DIR]
    emss evaluate   -c cfg.yaml [--out DIR]
    emss synth-data -c cfg.yaml [--out DIR]
    emss rf-report  [-c cfg.yaml] [--spec NAME] [--out DIR]
"""
import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional

from src.cli.exception_handlers import EXIT_OK, handle_exception
from src.config.experiment_loader import build_config, parse_config
from src.config.settings import RunKind
from src.models.experiment import ExperimentConfig
from src.service.experiment_facade import ExperimentFacadeService
from src.utils import ConfigError
from src.utils.logger import get_logger, resolve_level, setup_logging

logger = get_logger(__name__)

CONFIG_COMMANDS = (RunKind.PRETRAIN, RunKind.FINETUNE, RunKind.EVALUATE, RunKind.SYNTH_DATA)
DEFAULT_RF_OUTPUT = Path("runs/rf-report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emss", description="전자현미경 이미지 자기지도 사전학습/미세조정 실험 도구")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for kind in CONFIG_COMMANDS:
        sub = subparsers.add_parser(kind.value, help=f"{kind.value} 실행")
        sub.add_argument("-c", "--config", type=Path, required=True, help="실험 설정 YAML")
        _add_common(sub)

    rf = subparsers.add_parser(RunKind.RF_REPORT.value, help="프리셋 수용 영역 보고")
    rf.add_argument("-c", "--config", type=Path, default=None, help="실험 설정 YAML (선택)")
    rf.add_argument("--spec", default=None, help="단일 프리셋 이름 (기본: 9개 U-Net 전체)")
    _add_common(rf)
    return parser


def _add_common(sub: argparse.ArgumentParser):
    sub.add_argument("--out", type=Path, default=None, help="산출물 디렉토리 (설정의 output_dir 을 덮어씀)")
    sub.add_argument("--log-level", default=None, help="로그 레벨 (LOG_LEVEL 을 덮어씀)")


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """명령행 인자와 설정 파일을 합쳐 검증된 설정을 만든다"""
    kind = RunKind(args.command)
    overrides: Dict[str, Any] = {}
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    if getattr(args, "spec", None):
        overrides["rf_spec"] = args.spec

    if args.config is None:
        raw = {"kind": kind.value, "output_dir": str(DEFAULT_RF_OUTPUT), **overrides}
        return build_config(raw, "<command line>")

    config = parse_config(args.config, overrides=overrides, defaults={"kind": kind.value})
    if config.kind is not kind:
        raise ConfigError(f"설정의 kind({config.kind.value})가 명령({kind.value})과 다릅니다: {args.config}")
    return config


def main(argv: Optional[List[str]] = None) -> int:
    """CLI 진입점. 종료 코드를 반환한다."""
    args = build_parser().parse_args(argv)
    setup_logging(level=resolve_level(args.log_level) if args.log_level else None)

    try:
        config = load_config(args)
        summary = ExperimentFacadeService(config).run()
    except Exception as e:
        return handle_exception(e)
    logger.info(f"결과: {summary['output_dir']}")
    return EXIT_OK
