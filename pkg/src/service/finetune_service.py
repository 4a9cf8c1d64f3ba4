"""
미세조정 서비스

무작위 초기화(R) 또는 사전학습 체크포인트(P) 에서 출발해 생성자만 지도학습한다 (적대 항 없음).
- segmentation: BCE, 검증 Dice
- denoise / noise_bg_removal / superres: w1·L1 + w2·L2, 검증 L1
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import torch
from torch.optim import Adam

from src.config.settings import InitMode, Task, head_kind_for, metric_kind_for, runtime_config
from src.infra.networks import GeneratorNetwork
from src.models.model_spec import ModelSpec
from src.models.records import CheckpointRecord, MetricSeries, TransferReport
from src.models.training import AugmentPolicy, TrainHyper
from src.repository.base import SampleSource
from src.repository.checkpoint_repository import checkpoint_name, load_checkpoint, save_checkpoint
from src.service.evaluation_service import MASK_THRESHOLD, emit_series_csv, evaluate_network
from src.service.losses import bce_loss, regression_loss
from src.service.model_zoo import build_generator, network_from_record, replace_head, transfer_weights
from src.service.preprocessing import TorchSampleDataset, augment_transform, chain, eval_crop_transform, standardize
from src.service.training_loop import CheckpointSelector, check_finite, configure_determinism, make_loader
from src.utils import DatasetError, ModelSpecError
from src.utils.logger import get_logger

logger = get_logger(__name__)

RANDOM_TAG = "R"


def init_slug(provenance: str) -> str:
    """파일 이름용 초기화 태그: R → R, P(50k) → P50k"""
    return provenance.replace("(", "").replace(")", "")


@dataclass
class FinetuneRun:
    task: Task
    spec: ModelSpec
    train_set: SampleSource
    val_set: SampleSource
    output_dir: Path
    init: InitMode = InitMode.RANDOM
    checkpoint: Optional[Path] = None
    hyper: TrainHyper = field(default_factory=lambda: TrainHyper(batch_size=16))
    augment: AugmentPolicy = field(default_factory=AugmentPolicy)

    def __post_init__(self):
        self.output_dir = Path(self.output_dir)
        if self.task is Task.PRETEXT:
            raise ModelSpecError("미세조정 태스크는 segmentation/denoise/noise_bg_removal/superres 중 하나여야 합니다.")
        if self.init is InitMode.PRETRAINED and self.checkpoint is None:
            raise ModelSpecError("pretrained 초기화에는 체크포인트 경로가 필요합니다.")


def _initial_network(run: FinetuneRun) -> Tuple[GeneratorNetwork, str, Optional[TransferReport]]:
    """(head 가 교체된 네트워크, 출처 태그, 전이 보고서)"""
    net = build_generator(run.spec, seed=run.hyper.seed)
    provenance, report = RANDOM_TAG, None
    if run.init is InitMode.PRETRAINED:
        record = load_checkpoint(run.checkpoint)
        source = network_from_record(record)
        net, report = transfer_weights(source, net)
        provenance = record.provenance
    net = replace_head(net, head_kind_for(run.task), seed=run.hyper.seed + 1)
    return net, provenance, report


def finetune(run: FinetuneRun) -> Tuple[GeneratorNetwork, List[CheckpointRecord], MetricSeries]:
    """지도학습 → (최종 네트워크, 체크포인트 레코드, 검증 지표 시계열)"""
    hyper = run.hyper
    if len(run.train_set) == 0:
        raise DatasetError("미세조정 데이터셋이 비어 있습니다.")
    configure_determinism(hyper.seed)
    run.output_dir.mkdir(parents=True, exist_ok=True)
    device = torch.device(runtime_config.device)

    net, provenance, report = _initial_network(run)
    net = net.to(device)
    if report is not None:
        logger.info(f"사전학습 가중치 전이: {len(report.transferred)}개 (비율 {report.transfer_ratio:.2%})")

    metric = metric_kind_for(run.task)
    optimizer = Adam(net.parameters(), lr=hyper.learning_rate, betas=hyper.adam_betas)
    multiple = run.spec.size_multiple
    # 크롭이 없거나 배수가 아니면 학습 배치도 2^blocks 배수로 맞춘다
    train_data = TorchSampleDataset(run.train_set, chain(augment_transform(run.augment), eval_crop_transform(None, multiple)),
                                    seed=hyper.seed)
    val_data = TorchSampleDataset(run.val_set, eval_crop_transform(run.augment.crop_size, multiple))
    loader = make_loader(train_data, hyper.batch_size, seed=hyper.seed)

    def loss_fn(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
        if run.task is Task.SEGMENTATION:
            return bce_loss(pred, target)
        return regression_loss(pred, target, hyper.l1_weight, hyper.l2_weight)

    tag = init_slug(provenance)
    series = MetricSeries(kind=metric, label=f"{run.spec.name} {provenance}")
    series.initial = evaluate_network(net, val_data, metric)
    logger.info(f"미세조정 시작: {run.spec.name} {run.task.value} ({provenance}), "
                f"train {len(run.train_set)}, val {len(run.val_set)}, 초기 {metric.value}={series.initial:.6f}")

    selector = CheckpointSelector(hyper.checkpoint_policy, hyper.checkpoint_interval_epochs,
                                  higher_is_better=metric.higher_is_better)
    records: List[CheckpointRecord] = []
    checkpoint_dir = run.output_dir / "checkpoints"

    for epoch in range(1, hyper.epochs + 1):
        train_data.set_epoch(epoch)
        net.train()
        total, batches = 0.0, 0
        for batch, (inputs, targets) in enumerate(loader):
            inputs, targets = inputs.to(device), targets.to(device)
            loss = loss_fn(net(inputs), targets)
            check_finite(loss, f"epoch {epoch} batch {batch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss.detach())
            batches += 1

        value = evaluate_network(net, val_data, metric)
        series.add(epoch, value)
        logger.info(f"[epoch {epoch}/{hyper.epochs}] loss={total / max(batches, 1):.4f} val_{metric.value}={value:.6f}")

        selection = selector.observe(epoch, value, net)
        if selection is not None:
            record = CheckpointRecord(
                spec=run.spec,
                parameters=selection.state,
                epoch=epoch,
                best_val_metric=selection.value,
                metric_kind=metric,
                task=run.task,
                head_kind=head_kind_for(run.task),
                provenance=provenance,
                hyper=hyper,
                source_epoch=selection.epoch,
            )
            save_checkpoint(record, checkpoint_dir / checkpoint_name(run.spec.name, run.task.value, tag, epoch))
            records.append(record)

    emit_series_csv(series, run.output_dir / f"val_{metric.value}.csv")
    return net, records, series


def predict(net: GeneratorNetwork, image: np.ndarray, threshold: float = MASK_THRESHOLD) -> np.ndarray:
    """단일 이미지 추론. 입력은 표준화되고, 세그멘테이션 head 는 임계값 적용 마스크를 반환한다."""
    grid = standardize(image)
    if grid.ndim == 2:
        grid = grid[None]
    device = next(net.parameters()).device
    was_training = net.training
    net.eval()
    try:
        with torch.no_grad():
            output = net(torch.from_numpy(grid)[None].to(device))[0].cpu().numpy()
    finally:
        net.train(was_training)
    if getattr(net, "head_kind", None) is head_kind_for(Task.SEGMENTATION):
        return (output >= threshold).astype(np.float32)
    return output.astype(np.float32)
