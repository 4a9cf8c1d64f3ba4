"""
GAN 사전학습 서비스 (pretext: 손상된 이미지 → 원본 이미지)

배치마다 판별자 한 스텝 → 생성자 한 스텝 (1:1).
- 판별자: LSGAN 손실, 진짜 쌍 (x, y) / 가짜 쌍 (x, G(x))
- 생성자: LSGAN 손실 + λ·L1
에폭마다 검증 L1 을 기록하고 checkpoint_interval_epochs 마다 선택 정책에 따른 파라미터를 저장한다.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Tuple

import pandas as pd
import torch
from torch import nn
from torch.optim import Adam, Optimizer

from src.config.settings import HeadKind, MetricKind, Task, runtime_config
from src.infra.networks import GeneratorNetwork
from src.models.model_spec import ModelSpec
from src.models.records import CheckpointRecord, MetricSeries
from src.models.training import CorruptionPolicy, TrainHyper
from src.repository.base import SampleSource
from src.repository.checkpoint_repository import checkpoint_name, save_checkpoint
from src.service.evaluation_service import emit_series_csv, save_generator_samples, validate_generator
from src.service.losses import generator_objective, l1_recon_loss, lsgan_d_loss, lsgan_g_loss
from src.service.model_zoo import build_discriminator, build_generator
from src.service.preprocessing import TorchSampleDataset, chain, eval_crop_transform, pretext_transform, subset
from src.service.training_loop import CheckpointSelector, check_finite, configure_determinism, make_loader
from src.utils import DatasetError, ModelSpecError
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class PretrainRun:
    generator_spec: ModelSpec
    discriminator_spec: ModelSpec
    train_set: SampleSource
    val_set: SampleSource
    output_dir: Path
    hyper: TrainHyper = field(default_factory=TrainHyper)
    corruption: CorruptionPolicy = field(default_factory=CorruptionPolicy)

    def __post_init__(self):
        self.output_dir = Path(self.output_dir)
        paired = 2 * self.generator_spec.in_channels
        if self.discriminator_spec.in_channels != paired:
            raise ModelSpecError(
                f"판별자 입력 채널({self.discriminator_spec.in_channels})이 생성자 입출력 쌍({paired})과 맞지 않습니다."
            )
        if self.generator_spec.in_channels != self.generator_spec.out_channels:
            raise ModelSpecError("pretext 생성자는 입력/출력 채널 수가 같아야 합니다.")

    @property
    def provenance(self) -> str:
        """이 사전학습으로 초기화된 모델의 출처 태그 (예: P(50k))"""
        return f"P({self.hyper.subset_label})"


def discriminator_step(generator: nn.Module, discriminator: nn.Module, opt_d: Optimizer,
                       inputs: torch.Tensor, targets: torch.Tensor, where: str = "D-step") -> Tuple[torch.Tensor, torch.Tensor]:
    """판별자만 갱신 (생성 결과는 detach). (D 손실, 생성 결과) 반환"""
    fake = generator(inputs)
    d_loss = lsgan_d_loss(discriminator(inputs, targets), discriminator(inputs, fake.detach()))
    check_finite(d_loss, where)
    opt_d.zero_grad()
    d_loss.backward()
    opt_d.step()
    return d_loss.detach(), fake


def generator_step(discriminator: nn.Module, opt_g: Optimizer, inputs: torch.Tensor, targets: torch.Tensor,
                   fake: torch.Tensor, lambda_l1: float, where: str = "G-step") -> Tuple[torch.Tensor, torch.Tensor]:
    """생성자만 갱신. 판별자에 쌓인 기울기는 다음 D-step 의 zero_grad 로 지워진다. (적대 손실, L1) 반환"""
    g_adv = lsgan_g_loss(discriminator(inputs, fake))
    l1 = l1_recon_loss(fake, targets)
    g_loss = generator_objective(g_adv, l1, lambda_l1)
    check_finite(g_loss, where)
    opt_g.zero_grad()
    g_loss.backward()
    opt_g.step()
    return g_adv.detach(), l1.detach()


def pretrain(run: PretrainRun) -> Tuple[GeneratorNetwork, List[CheckpointRecord], MetricSeries]:
    """pretext GAN 학습 → (최종 생성자, 체크포인트 레코드, 검증 L1 시계열)"""
    hyper = run.hyper
    if len(run.train_set) == 0:
        raise DatasetError("사전학습 데이터셋이 비어 있습니다.")
    configure_determinism(hyper.seed)
    run.output_dir.mkdir(parents=True, exist_ok=True)
    device = torch.device(runtime_config.device)

    train_source = run.train_set
    if hyper.subset_size is not None:
        train_source = subset(train_source, hyper.subset_size, seed=hyper.seed)

    generator = build_generator(run.generator_spec, seed=hyper.seed).to(device)
    discriminator = build_discriminator(run.discriminator_spec, seed=hyper.seed + 1).to(device)
    opt_g = Adam(generator.parameters(), lr=hyper.learning_rate, betas=hyper.adam_betas)
    opt_d = Adam(discriminator.parameters(), lr=hyper.learning_rate, betas=hyper.adam_betas)

    transform = chain(eval_crop_transform(None, run.generator_spec.size_multiple), pretext_transform(run.corruption))
    train_data = TorchSampleDataset(train_source, transform, seed=hyper.seed)
    # 검증 손상은 인덱스별로 고정
    val_data = TorchSampleDataset(run.val_set, transform, seed=hyper.seed + 1)
    loader = make_loader(train_data, hyper.batch_size, seed=hyper.seed)

    checkpoint_dir = run.output_dir / "checkpoints"
    series = MetricSeries(kind=MetricKind.L1, label=f"{run.generator_spec.name} pretext")
    series.initial = validate_generator(generator, val_data)
    logger.info(f"사전학습 시작: {run.generator_spec.name}, train {len(train_source)}, val {len(run.val_set)}, "
                f"초기 검증 L1={series.initial:.6f}")

    selector = CheckpointSelector(hyper.checkpoint_policy, hyper.checkpoint_interval_epochs, higher_is_better=False)
    records: List[CheckpointRecord] = []
    loss_rows = []

    for epoch in range(1, hyper.epochs + 1):
        train_data.set_epoch(epoch)
        generator.train()
        discriminator.train()
        totals = {"d_loss": 0.0, "g_adv": 0.0, "l1": 0.0}
        batches = 0

        for batch, (inputs, targets) in enumerate(loader):
            inputs, targets = inputs.to(device), targets.to(device)

            d_loss, fake = discriminator_step(generator, discriminator, opt_d, inputs, targets,
                                              f"epoch {epoch} batch {batch} D-step")
            g_adv, l1 = generator_step(discriminator, opt_g, inputs, targets, fake, hyper.lambda_l1,
                                       f"epoch {epoch} batch {batch} G-step")

            totals["d_loss"] += float(d_loss)
            totals["g_adv"] += float(g_adv)
            totals["l1"] += float(l1)
            batches += 1

        val_l1 = validate_generator(generator, val_data)
        series.add(epoch, val_l1)
        losses = {name: value / max(batches, 1) for name, value in totals.items()}
        loss_rows.append({"epoch": epoch, **losses, "val_l1": val_l1})
        logger.info(f"[epoch {epoch}/{hyper.epochs}] D={losses['d_loss']:.4f} G_adv={losses['g_adv']:.4f} "
                    f"L1={losses['l1']:.4f} val_L1={val_l1:.6f}")

        selection = selector.observe(epoch, val_l1, generator)
        if selection is not None:
            record = CheckpointRecord(
                spec=run.generator_spec,
                parameters=selection.state,
                epoch=epoch,
                best_val_metric=selection.value,
                metric_kind=MetricKind.L1,
                task=Task.PRETEXT,
                head_kind=HeadKind.REGRESSION,
                provenance=run.provenance,
                hyper=hyper,
                source_epoch=selection.epoch,
            )
            path = save_checkpoint(
                record, checkpoint_dir / checkpoint_name(run.generator_spec.name, Task.PRETEXT.value, hyper.subset_label, epoch)
            )
            records.append(record)
            logger.info(f"체크포인트 저장: {path.name} (epoch {selection.epoch} 파라미터, val_L1={selection.value:.6f})")
            if hyper.save_samples:
                save_generator_samples(generator, val_data, run.output_dir / "samples" / f"e{epoch}.png")

    pd.DataFrame(loss_rows).to_csv(run.output_dir / "train_losses.csv", index=False)
    emit_series_csv(series, run.output_dir / "val_l1.csv")
    return generator, records, series
