"""
실험 파사드 서비스
- Facade 패턴: 사전학습/미세조정/평가/합성/수용 영역 보고를 단일 진입점으로 제공
- 실행 디렉토리 준비 (run.log, environment.json, effective_config.yaml) 와 데이터/모델 해석 담당
"""
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.config.experiment_loader import write_effective_config
from src.config.settings import InitMode, RunKind, Task, metric_kind_for
from src.models.experiment import ExperimentConfig
from src.models.model_spec import ModelSpec
from src.models.records import CheckpointRecord, MetricSeries, MetricTable
from src.models.training import SplitSpec
from src.repository.base import SampleSource
from src.repository.checkpoint_repository import list_checkpoints, load_checkpoint
from src.repository.dataset_repository import DirectoryDataset, SubsetDataset, ingest_dataset, write_layout
from src.service.evaluation_service import emit_convergence_plot, emit_table, evaluate_checkpoints
from src.service.finetune_service import FinetuneRun, finetune
from src.service.model_zoo import (
    build_generator, count_parameters, describe_layers, discriminator_spec, get_preset,
    measure_receptive_field, receptive_field, unet_preset_names, validate_spec
)
from src.service.preprocessing import PatchSource, split
from src.service.pretrain_service import PretrainRun, pretrain
from src.service.synth_service import synth_corpus
from src.utils import CheckpointError, DatasetError, MetricError
from src.utils.logger import attach_run_log, detach_run_log, get_logger
from src.utils.system_info import SystemInfoCollector

logger = get_logger(__name__)

TABLE_SUFFIX = {"csv": ".csv", "markdown": ".md"}
# 수용 영역은 채널 폭과 무관하므로 측정은 좁은 네트워크로 한다
RF_PROBE_WIDTH = 2


class ExperimentFacadeService:
    """실험 실행의 통합 파사드"""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.output_dir = Path(config.output_dir)
        self._handlers = {
            RunKind.PRETRAIN: self.run_pretrain,
            RunKind.FINETUNE: self.run_finetune,
            RunKind.EVALUATE: self.run_evaluate,
            RunKind.SYNTH_DATA: self.run_synth_data,
            RunKind.RF_REPORT: self.run_rf_report,
        }

    def run(self) -> Dict[str, Any]:
        """설정의 kind 에 맞는 실행을 수행하고 요약 dict 를 반환"""
        # 1. 실행 디렉토리 준비
        self.output_dir.mkdir(parents=True, exist_ok=True)
        handler = attach_run_log(str(self.output_dir))
        try:
            # 2. 재현 정보 기록
            write_effective_config(self.config, self.output_dir)
            SystemInfoCollector.write_environment(str(self.output_dir))
            logger.info(f"실행 시작: {self.config.kind.value} → {self.output_dir}")

            # 3. 실행 종류별 처리
            summary = self._handlers[self.config.kind]()
            logger.info(f"실행 완료: {self.config.kind.value}")
            return {"kind": self.config.kind.value, "output_dir": str(self.output_dir), **summary}
        finally:
            detach_run_log(handler)

    # === 모델/데이터 해석 ===

    def _generator_spec(self, out_channels: Optional[int] = None) -> ModelSpec:
        section = self.config.model
        if section.spec is not None:
            spec = section.spec
            validate_spec(spec)
            return spec
        out = section.in_channels if out_channels is None else out_channels
        return get_preset(section.preset, in_channels=section.in_channels, out_channels=out, width=section.width)

    def _source(self, task: Task) -> SampleSource:
        data = self.config.data
        if data.synthetic is not None:
            return synth_corpus(data.synthetic, seed=data.synthetic_seed).view(task)
        return ingest_dataset(data.root, data.layout_manifest, task=task)

    def _splits(self, task: Task) -> Tuple[SampleSource, SampleSource, SampleSource]:
        """(train, val, test). data.patch_size 가 있으면 분할 후 각 분할을 타일로 나눈다."""
        data = self.config.data
        parts = self._raw_splits(task)
        if data.patch_size is None:
            return parts
        return tuple(PatchSource(part, data.patch_size, data.reject_background, data.bg_threshold) for part in parts)

    def _raw_splits(self, task: Task) -> Tuple[SampleSource, SampleSource, SampleSource]:
        """레이아웃에 train 과 val/test 중 하나 이상이 있으면 그대로 쓰고, 없으면 data.split 으로 나눈다.

        레이아웃에 val 이 없으면 train 에서만 떼어 내므로 test 샘플은 학습에 섞이지 않는다.
        """
        source = self._source(task)
        if isinstance(source, DirectoryDataset):
            present = {entry.split for entry in source.entries}
            if "train" in present and present & {"val", "test"}:
                train = source.filter(split="train")
                test = source.filter(split="test") if "test" in present else SubsetDataset(source, [])
                if "val" in present:
                    val = source.filter(split="val")
                else:
                    train, val = self._carve_val(train)
                logger.info(f"레이아웃 분할 사용: train {len(train)}, val {len(val)}, test {len(test)}")
                return train, val, test
        return split(source, self.config.data.split)

    def _carve_val(self, train: SampleSource) -> Tuple[SampleSource, SampleSource]:
        """data.split 의 train:val 비율 (또는 val 개수) 로 train 에서 val 을 떼어 낸다"""
        spec = self.config.data.split
        if len(train) < 2:
            raise DatasetError(f"train 분할({len(train)}개)에서 val 을 떼어 낼 수 없습니다.")
        if spec.is_fraction:
            share = spec.val / (spec.train + spec.val) if spec.train + spec.val > 0 else 0.0
            n_val = int(np.floor(share * len(train) + 1e-9))
        else:
            n_val = int(spec.val)
        n_val = min(max(n_val, 1), len(train) - 1)
        carved = SplitSpec(unit="count", train=len(train) - n_val, val=n_val, test=0, seed=spec.seed)
        train_part, val_part, _ = split(train, carved)
        logger.info(f"레이아웃에 val 이 없어 train 에서 {n_val}개를 떼어 냄")
        return train_part, val_part

    # === 실행 종류별 처리 ===

    def run_pretrain(self) -> Dict[str, Any]:
        """pretext GAN 사전학습"""
        config = self.config
        generator_spec = self._generator_spec()
        disc_spec = discriminator_spec(image_channels=generator_spec.in_channels, width=config.discriminator.width)
        train_set, val_set, _ = self._splits(Task.PRETEXT)

        run = PretrainRun(
            generator_spec=generator_spec,
            discriminator_spec=disc_spec,
            train_set=train_set,
            val_set=val_set,
            output_dir=self.output_dir,
            hyper=config.hyper,
            corruption=config.corruption,
        )
        _, records, series = pretrain(run)
        return self._training_summary(records, series)

    def run_finetune(self) -> Dict[str, Any]:
        """다운스트림 태스크 미세조정"""
        config = self.config
        spec = self._generator_spec()
        train_set, val_set, _ = self._splits(config.task)

        run = FinetuneRun(
            task=config.task,
            spec=spec,
            train_set=train_set,
            val_set=val_set,
            output_dir=self.output_dir,
            init=config.init.mode,
            checkpoint=config.init.checkpoint if config.init.mode is InitMode.PRETRAINED else None,
            hyper=config.hyper,
            augment=config.augment,
        )
        _, records, series = finetune(run)
        return self._training_summary(records, series)

    def _training_summary(self, records: List[CheckpointRecord], series: MetricSeries) -> Dict[str, Any]:
        if len(series):
            emit_convergence_plot([series], self.output_dir / f"val_{series.kind.value}.png")
        return {
            "checkpoints": [record.epoch for record in records],
            "initial": series.initial,
            "final": series.values[series.epochs[-1]] if len(series) else None,
        }

    def _load_grouped(self, checkpoint_dir: Path) -> "OrderedDict[Tuple[str, str], List[CheckpointRecord]]":
        """체크포인트를 (spec, init) 별로 묶는다 (파일 이름순으로 처음 나온 순서 유지)"""
        groups: "OrderedDict[Tuple[str, str], List[CheckpointRecord]]" = OrderedDict()
        for path in list_checkpoints(checkpoint_dir):
            try:
                record = load_checkpoint(path)
            except CheckpointError as e:
                raise CheckpointError(f"체크포인트를 불러올 수 없습니다 ({path}): {e}") from e
            if record.task is not self.config.task:
                logger.debug(f"다른 태스크 체크포인트 건너뜀: {path.name} ({record.task.value})")
                continue
            groups.setdefault((record.spec.name, record.provenance), []).append(record)
        for records in groups.values():
            records.sort(key=lambda r: r.epoch)
        return groups

    def run_evaluate(self) -> Dict[str, Any]:
        """체크포인트 디렉토리 평가 → MetricTable (csv/markdown)"""
        config = self.config
        metric = metric_kind_for(config.task)
        groups = self._load_grouped(config.evaluate.checkpoint_dir)
        if not groups:
            raise MetricError(f"{config.evaluate.checkpoint_dir} 에 {config.task.value} 체크포인트가 없습니다.")

        _, _, test_set = self._splits(config.task)
        if len(test_set) == 0:
            raise MetricError("평가용 test 분할이 비어 있습니다.")

        rows = [evaluate_checkpoints(records, test_set, metric, batch_size=config.evaluate.batch_size,
                                    crop_size=config.augment.crop_size)
                for records in groups.values()]
        try:
            table = MetricTable(metric=metric, rows=rows)
        except ValidationError as e:
            raise MetricError(f"체크포인트 에폭 구성이 행마다 다릅니다: {e}") from e

        paths = [str(emit_table(table, self.output_dir / f"test_{metric.value}{TABLE_SUFFIX[fmt]}", fmt=fmt))
                 for fmt in config.evaluate.formats]
        if config.evaluate.plot:
            curves = []
            for row in rows:
                curve = MetricSeries(kind=metric, label=f"{row.spec} {row.init}")
                for epoch, value in row.values.items():
                    curve.add(epoch, value)
                curves.append(curve)
            paths.append(str(emit_convergence_plot(curves, self.output_dir / f"test_{metric.value}.png")))
        return {"rows": len(rows), "epochs": table.epochs, "tables": paths}

    def run_synth_data(self) -> Dict[str, Any]:
        """합성 코퍼스를 분할해 태스크별 레이아웃으로 기록"""
        data = self.config.data
        corpus = synth_corpus(data.synthetic, seed=data.synthetic_seed)
        parts = split(corpus, data.split)
        root = self.output_dir / "data"

        counts: Dict[str, int] = {}
        for task in self.config.synth.tasks:
            for split_name, part in zip(("train", "val", "test"), parts):
                if len(part) == 0:
                    continue
                write_layout(SubsetDataset(corpus.view(task), part.indices), root, split_name, task)
            counts[task.value] = len(corpus)
        return {"data_root": str(root), "samples": counts}

    def run_rf_report(self) -> Dict[str, Any]:
        """프리셋별 해석적/측정 수용 영역과 파라미터 수 보고"""
        names = [self.config.rf_spec] if self.config.rf_spec else unet_preset_names()
        rows = []
        for name in names:
            spec = get_preset(name)
            analytic = receptive_field(spec)
            probe_net = build_generator(get_preset(name, width=RF_PROBE_WIDTH))
            measured = measure_receptive_field(probe_net, in_channels=spec.in_channels)
            rows.append({
                "spec": name,
                "target_rf": spec.target_rf,
                "analytic_rf": analytic,
                "measured_rf": measured,
                "parameters": count_parameters(build_generator(spec)),
            })
            logger.info(f"{name}: 해석적 RF={analytic}, 측정 RF={measured}")
            if self.config.rf_spec:
                pd.DataFrame(describe_layers(spec)).to_csv(self.output_dir / f"rf_layers_{name}.csv", index=False)

        frame = pd.DataFrame(rows)
        frame.to_csv(self.output_dir / "rf_report.csv", index=False)
        header = list(frame.columns)
        lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] * len(header)) + "|"]
        lines += ["| " + " | ".join(str(row[key]) for key in header) + " |" for row in rows]
        (self.output_dir / "rf_report.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
        # HRNet 은 목표 수용 영역이 없다
        mismatched = [row["spec"] for row in rows if row["target_rf"] is not None
                      and not row["target_rf"] == row["analytic_rf"] == row["measured_rf"]]
        if mismatched:
            logger.warning(f"수용 영역 불일치: {mismatched}")
        return {"rows": rows, "mismatched": mismatched}
