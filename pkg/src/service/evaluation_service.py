"""
평가 서비스
- Dice / 샘플 평균 L1
- 체크포인트 주기별 테스트 평가 → MetricTable 행
- 표 (CSV/markdown), 지표 시계열 CSV, 수렴 곡선 플롯
"""
import re
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np
import pandas as pd
import torch
from torch import nn
from torch.utils.data import DataLoader, Dataset

from src.config.settings import MetricKind, metric_kind_for, runtime_config
from src.models.records import CheckpointRecord, MetricRow, MetricSeries, MetricTable
from src.repository.base import SampleSource
from src.repository.checkpoint_repository import load_checkpoint
from src.service.model_zoo import network_from_record
from src.service.preprocessing import TorchSampleDataset, eval_crop_transform
from src.utils import CheckpointError, DatasetError, MetricError
from src.utils.logger import get_logger

logger = get_logger(__name__)

MASK_THRESHOLD = 0.5
TABLE_COLUMNS = ["spec", "init", "epoch", "metric", "value"]


def _as_binary(values, name: str) -> np.ndarray:
    array = values.detach().cpu().numpy() if isinstance(values, torch.Tensor) else np.asarray(values)
    if not np.isin(array, (0, 1)).all():
        raise MetricError(f"{name} 는 0/1 이진 마스크여야 합니다.")
    return array.astype(bool)


def dice(pred_mask, gt_mask) -> float:
    """2·|pred∩gt| / (|pred|+|gt|), 둘 다 비어 있으면 1.0"""
    pred = _as_binary(pred_mask, "pred_mask")
    gt = _as_binary(gt_mask, "gt_mask")
    if pred.shape != gt.shape:
        raise MetricError(f"마스크 shape 불일치: {pred.shape} vs {gt.shape}")
    total = int(pred.sum()) + int(gt.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(pred, gt).sum()) / total


def _as_dataset(data: Union[SampleSource, Dataset], net: nn.Module, crop_size: Optional[int]) -> Dataset:
    """SampleSource 는 네트워크 입력 배수에 맞춰 중앙 크롭한다"""
    if not isinstance(data, SampleSource):
        return data
    spec = getattr(net, "spec", None)
    multiple = spec.size_multiple if spec is not None else 1
    return TorchSampleDataset(data, eval_crop_transform(crop_size, multiple))


def evaluate_network(net: nn.Module, data: Union[SampleSource, Dataset], metric: MetricKind,
                     batch_size: int = 8, threshold: float = MASK_THRESHOLD,
                     crop_size: Optional[int] = None) -> float:
    """샘플 평균 지표 (배치 크기와 무관). 파라미터와 학습 모드를 변경하지 않는다.

    SampleSource 는 min(crop_size, 변) 을 2^blocks 배수로 내린 크기로 중앙 크롭해 평가한다.
    """
    dataset = _as_dataset(data, net, crop_size)
    if len(dataset) == 0:
        raise DatasetError("평가 데이터셋이 비어 있습니다.")

    device = next(net.parameters(), torch.empty(0)).device
    was_training = net.training
    net.eval()
    scores: List[float] = []
    try:
        with torch.no_grad():
            for inputs, targets in DataLoader(dataset, batch_size=batch_size, shuffle=False):
                outputs = net(inputs.to(device)).cpu()
                if metric is MetricKind.DICE:
                    predictions = (outputs >= threshold).float()
                    scores.extend(dice(p, t) for p, t in zip(predictions, targets))
                else:
                    scores.extend((outputs - targets).abs().flatten(1).mean(dim=1).tolist())
    finally:
        net.train(was_training)
    return float(np.mean(scores))


def validate_generator(net: nn.Module, val_set: Union[SampleSource, Dataset], batch_size: int = 8) -> float:
    """생성 결과와 깨끗한 타깃 사이의 샘플 평균 L1 (파라미터 갱신 없음)"""
    return evaluate_network(net, val_set, MetricKind.L1, batch_size=batch_size)


# === 체크포인트 평가 ===

def _epoch_from_name(path: Path) -> str:
    match = re.search(r"_e(\d+)", path.stem)
    return match.group(1) if match else "?"


def evaluate_checkpoints(checkpoints: Sequence[Union[str, Path, CheckpointRecord]], test_set: Union[SampleSource, Dataset],
                         metric: MetricKind, batch_size: int = 8, crop_size: Optional[int] = None) -> MetricRow:
    """저장된 파라미터 그대로 (추가 학습 없이) 체크포인트별 지표 계산"""
    if not checkpoints:
        raise MetricError("평가할 체크포인트가 없습니다.")

    values = {}
    spec_name: Optional[str] = None
    init: Optional[str] = None
    for item in checkpoints:
        if isinstance(item, CheckpointRecord):
            record = item
        else:
            path = Path(item)
            try:
                record = load_checkpoint(path)
            except CheckpointError as e:
                raise CheckpointError(f"epoch {_epoch_from_name(path)} 체크포인트를 불러올 수 없습니다 ({path}): {e}") from e

        expected = metric_kind_for(record.task)
        if metric is not expected:
            raise MetricError(f"{record.task.value} 태스크에는 {metric.value} 지표를 쓸 수 없습니다 (기대: {expected.value}).")
        if spec_name is None:
            spec_name, init = record.spec.name, record.provenance
        elif (record.spec.name, record.provenance) != (spec_name, init):
            raise MetricError(f"한 행에 서로 다른 (spec, init) 이 섞였습니다: {spec_name}/{init} vs {record.spec.name}/{record.provenance}")
        if record.epoch in values:
            raise MetricError(f"epoch {record.epoch} 체크포인트가 중복되었습니다.")

        net = network_from_record(record).to(runtime_config.device)
        values[record.epoch] = evaluate_network(net, test_set, metric, batch_size=batch_size, crop_size=crop_size)
        logger.info(f"평가: {spec_name} {init} epoch {record.epoch} → {metric.value}={values[record.epoch]:.6f}")

    return MetricRow(spec=spec_name, init=init, values=dict(sorted(values.items())))


# === 표/시계열 출력 ===

def _format_cell(metric: MetricKind, value: float) -> str:
    if metric is MetricKind.DICE:
        return f"{value * 100:.2f}"
    return f"{value:.4f}"


def emit_table(table: MetricTable, path: Union[str, Path], fmt: str = "csv") -> Path:
    """CSV (spec,init,epoch,metric,value) 또는 부록 형태 markdown"""
    if not table.rows:
        raise MetricError("빈 테이블은 출력할 수 없습니다.")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    if fmt == "csv":
        records = [
            {"spec": row.spec, "init": row.init, "epoch": epoch, "metric": table.metric.value, "value": value}
            for row in table.rows for epoch, value in sorted(row.values.items())
        ]
        pd.DataFrame(records, columns=TABLE_COLUMNS).to_csv(path, index=False)
    elif fmt == "markdown":
        unit = "Dice (%)" if table.metric is MetricKind.DICE else "L1"
        header = ["Model", "Init"] + [str(epoch) for epoch in table.epochs]
        lines = [
            f"<!-- {unit} -->",
            "| " + " | ".join(header) + " |",
            "|" + "|".join(["---"] * len(header)) + "|",
        ]
        for row in table.rows:
            cells = [row.spec, row.init] + [_format_cell(table.metric, row.values[e]) for e in table.epochs]
            lines.append("| " + " | ".join(cells) + " |")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise MetricError(f"지원하지 않는 표 형식: {fmt} (csv, markdown)")
    return path


def parse_table(path: Union[str, Path]) -> MetricTable:
    """emit_table(csv) 의 역변환"""
    try:
        frame = pd.read_csv(path, float_precision="round_trip", dtype={"spec": str, "init": str, "metric": str})
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise MetricError(f"표를 읽을 수 없습니다: {path}") from e
    if list(frame.columns) != TABLE_COLUMNS:
        raise MetricError(f"표 컬럼이 {TABLE_COLUMNS} 와 다릅니다: {list(frame.columns)}")
    metrics = frame["metric"].unique()
    if len(metrics) != 1:
        raise MetricError(f"표에는 한 종류의 지표만 있어야 합니다: {list(metrics)}")

    rows = []
    for (spec, init), group in frame.groupby(["spec", "init"], sort=False):
        values = {int(epoch): float(value) for epoch, value in zip(group["epoch"], group["value"])}
        rows.append(MetricRow(spec=spec, init=init, values=values))
    try:
        return MetricTable(metric=MetricKind(metrics[0]), rows=rows)
    except ValueError as e:
        raise MetricError(f"표 구성이 올바르지 않습니다: {path}: {e}") from e


def emit_series_csv(series: MetricSeries, path: Union[str, Path]) -> Path:
    """epoch,val_<metric> CSV (학습 전 값은 epoch 0)"""
    rows = []
    if series.initial is not None:
        rows.append((0, series.initial))
    rows.extend((epoch, series.values[epoch]) for epoch in series.epochs)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=["epoch", f"val_{series.kind.value}"]).to_csv(path, index=False)
    return path


def emit_convergence_plot(series_list: Iterable[MetricSeries], path: Union[str, Path]) -> Path:
    """시계열마다 곡선 하나 (범례: 스펙 + 초기화)"""
    series_list = list(series_list)
    if not series_list:
        raise MetricError("플롯할 시계열이 없습니다.")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    fig, ax = plt.subplots(figsize=(6, 4), dpi=100)
    try:
        for series in series_list:
            epochs = ([0] if series.initial is not None else []) + series.epochs
            values = ([series.initial] if series.initial is not None else []) + [series.values[e] for e in series.epochs]
            ax.plot(epochs, values, marker="o", markersize=3, label=series.label or series.kind.value)
        kinds = {series.kind for series in series_list}
        ax.set_xlabel("epoch")
        ax.set_ylabel("validation " + "/".join(sorted(kind.value for kind in kinds)))
        ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="png", metadata={"Software": None})
    finally:
        plt.close(fig)
    return path


def save_generator_samples(net: nn.Module, dataset: Dataset, path: Union[str, Path], count: int = 4) -> Path:
    """(입력 | 타깃 | 출력) 이미지 격자 저장"""
    count = min(count, len(dataset))
    if count == 0:
        raise DatasetError("저장할 샘플이 없습니다.")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    device = next(net.parameters()).device
    was_training = net.training
    net.eval()
    fig, axes = plt.subplots(count, 3, figsize=(6, 2 * count), squeeze=False)
    try:
        with torch.no_grad():
            for row in range(count):
                inputs, targets = dataset[row]
                output = net(inputs[None].to(device))[0].cpu()
                for col, (title, image) in enumerate((("input", inputs), ("target", targets), ("output", output))):
                    axes[row][col].imshow(image[0].numpy(), cmap="gray")
                    axes[row][col].set_axis_off()
                    if row == 0:
                        axes[row][col].set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="png", metadata={"Software": None})
    finally:
        plt.close(fig)
        net.train(was_training)
    return path

