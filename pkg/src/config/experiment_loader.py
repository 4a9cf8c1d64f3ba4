from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from pydantic import ValidationError

from src.models.experiment import ExperimentConfig
from src.service.model_zoo import list_presets
from src.utils import ConfigError

EFFECTIVE_CONFIG_FILE = "effective_config.yaml"


def _format_errors(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"  {path}: {item['msg']}")
    return "\n".join(lines)


def _check_preset(path: str, name: Optional[str]):
    if name is not None and name not in list_presets():
        raise ConfigError(f"{path}: 알 수 없는 스펙 이름 {name}. 사용 가능한 프리셋: {', '.join(list_presets())}")


def build_config(raw: Dict[str, Any], source: str = "<dict>") -> ExperimentConfig:
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"설정 검증 실패 ({source}):\n{_format_errors(e)}") from e
    if config.model is not None:
        _check_preset("model.preset", config.model.preset)
    _check_preset("rf_spec", config.rf_spec)
    return config


def parse_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None,
                 defaults: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """YAML 실험 설정을 읽고 검증한다.

    defaults 는 파일에 없는 최상위 키만 채우고 (예: kind), overrides 는 항상 덮어쓴다 (예: output_dir).
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"설정 파일을 읽을 수 없습니다: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"YAML 형식 오류: {path}: {e}") from e

    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"설정 최상위는 매핑이어야 합니다: {path}")
    for key, value in (defaults or {}).items():
        raw.setdefault(key, value)
    raw.update(overrides or {})
    return build_config(raw, str(path))


def write_effective_config(config: ExperimentConfig, output_dir: Union[str, Path]) -> Path:
    """기본값이 채워진 최종 설정을 output_dir/effective_config.yaml 로 기록"""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    path = output_dir / EFFECTIVE_CONFIG_FILE
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.effective(), f, sort_keys=False, allow_unicode=True)
    return path
