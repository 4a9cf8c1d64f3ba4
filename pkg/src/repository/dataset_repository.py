"""
디렉토리 데이터셋 저장소

레이아웃:
    <root>/layout.yaml
    <root>/<task>/<split>/inputs/<stem>.tif|png
    <root>/<task>/<split>/targets/<stem>.tif|png

입력/회귀 타깃은 float32 TIFF, 세그멘테이션 마스크는 PNG (0/255) 로 저장한다.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import yaml
from PIL import Image, UnidentifiedImageError

from src.config.settings import Task
from src.models.sample import SamplePair
from src.repository.base import SampleSource
from src.utils import DatasetError
from src.utils.logger import get_logger

logger = get_logger(__name__)

LAYOUT_FILE = "layout.yaml"
LAYOUT_VERSION = 1
IMAGE_SUFFIXES = (".tif", ".tiff", ".png")
SPLIT_NAMES = ("train", "val", "test")


@dataclass(frozen=True)
class SampleEntry:
    task: Task
    split: str
    stem: str
    input_path: Path
    target_path: Path


def read_image(path: Path) -> np.ndarray:
    """래스터 파일 → (C, H, W) float32"""
    try:
        with Image.open(path) as img:
            array = np.asarray(img, dtype=np.float32)
    except (OSError, UnidentifiedImageError) as e:
        raise DatasetError(f"이미지를 읽을 수 없습니다: {path}") from e
    if array.ndim == 2:
        return array[None].copy()
    return np.ascontiguousarray(array.transpose(2, 0, 1))


def read_mask(path: Path) -> np.ndarray:
    return (read_image(path)[:1] > 0).astype(np.float32)


def write_image(path: Path, grid: np.ndarray):
    """(1, H, W) 그리드 → float32 TIFF"""
    if grid.ndim == 3 and grid.shape[0] != 1:
        raise DatasetError(f"단일 채널 이미지만 저장할 수 있습니다: shape={grid.shape}")
    Image.fromarray(np.asarray(grid, dtype=np.float32).reshape(grid.shape[-2:])).save(path, format="TIFF")


def write_mask(path: Path, grid: np.ndarray):
    binary = (np.asarray(grid).reshape(grid.shape[-2:]) > 0).astype(np.uint8) * 255
    Image.fromarray(binary).save(path, format="PNG")


def _list_images(folder: Path) -> Dict[str, Path]:
    if not folder.is_dir():
        return {}
    return {p.stem: p for p in sorted(folder.iterdir()) if p.suffix.lower() in IMAGE_SUFFIXES}


class DirectoryDataset(SampleSource):
    """레이아웃 디렉토리를 지연 로딩하는 데이터셋 (정렬 순서 고정)"""

    def __init__(self, root: Union[str, Path], entries: List[SampleEntry], manifest: Optional[dict] = None):
        self.root = Path(root)
        self.entries = entries
        self.manifest = manifest or {}
        self.task = entries[0].task if entries else Task.PRETEXT

    def __len__(self) -> int:
        return len(self.entries)

    def names(self) -> List[str]:
        return [entry.stem for entry in self.entries]

    @property
    def tasks(self) -> List[Task]:
        return sorted({entry.task for entry in self.entries}, key=lambda t: t.value)

    def filter(self, task: Optional[Task] = None, split: Optional[str] = None) -> "DirectoryDataset":
        entries = [e for e in self.entries
                   if (task is None or e.task is task) and (split is None or e.split == split)]
        if not entries:
            raise DatasetError(f"{self.root}: task={task and task.value}, split={split} 에 해당하는 샘플이 없습니다 (no samples).")
        return DirectoryDataset(self.root, entries, self.manifest)

    def get(self, index: int) -> SamplePair:
        entry = self.entries[index]
        image = read_image(entry.input_path)
        target = read_mask(entry.target_path) if entry.task is Task.SEGMENTATION else read_image(entry.target_path)
        try:
            return SamplePair(image, target, entry.task, {"stem": entry.stem, "split": entry.split})
        except ValueError as e:
            raise DatasetError(f"{entry.input_path.name}: {e}") from e


class SubsetDataset(SampleSource):
    """다른 SampleSource 의 인덱스 부분집합 뷰"""

    def __init__(self, source: SampleSource, indices: Sequence[int]):
        self.source = source
        self.indices = list(indices)
        self.task = source.task

    def __len__(self) -> int:
        return len(self.indices)

    def get(self, index: int) -> SamplePair:
        return self.source.get(self.indices[index])

    def names(self) -> List[str]:
        names = self.source.names()
        return [names[i] for i in self.indices]

    @property
    def tasks(self) -> List[Task]:
        return self.source.tasks


def load_manifest(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            manifest = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise DatasetError(f"레이아웃 매니페스트를 읽을 수 없습니다: {path}") from e
    if not isinstance(manifest, dict) or "tasks" not in manifest:
        raise DatasetError(f"레이아웃 매니페스트에 tasks 항목이 없습니다: {path}")
    return manifest


def ingest_dataset(root_path: Union[str, Path], layout_manifest: Optional[Union[str, Path]] = None,
                   task: Optional[Task] = None, split: Optional[str] = None) -> DirectoryDataset:
    """레이아웃 디렉토리를 지연 로딩 핸들로 연다.

    입력에 대응하는 타깃이 없으면 해당 파일 이름과 함께 DatasetError 를 발생시킨다.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise DatasetError(f"데이터셋 디렉토리가 없습니다: {root}")

    manifest_path = Path(layout_manifest) if layout_manifest else root / LAYOUT_FILE
    manifest = load_manifest(manifest_path) if manifest_path.exists() else {}
    if manifest:
        task_names = list(manifest["tasks"])
    else:
        task_names = sorted(p.name for p in root.iterdir() if p.is_dir())

    entries: List[SampleEntry] = []
    for task_name in task_names:
        try:
            task_value = Task(task_name)
        except ValueError:
            logger.warning(f"알 수 없는 태스크 디렉토리 무시: {task_name}")
            continue
        if task is not None and task_value is not task:
            continue
        split_names = (manifest.get("tasks", {}).get(task_name) or {}).get("splits") or SPLIT_NAMES
        for split_name in split_names:
            if split is not None and split_name != split:
                continue
            base = root / task_name / split_name
            inputs = _list_images(base / "inputs")
            targets = _list_images(base / "targets")
            for stem, input_path in inputs.items():
                if stem not in targets:
                    raise DatasetError(f"입력 {input_path} 에 대응하는 타깃 파일이 없습니다.")
                entries.append(SampleEntry(task_value, split_name, stem, input_path, targets[stem]))

    if not entries:
        raise DatasetError(f"{root}: no samples (task={task and task.value}, split={split})")
    logger.info(f"데이터셋 로드: {root} ({len(entries)}개, tasks={sorted({e.task.value for e in entries})})")
    return DirectoryDataset(root, entries, manifest)


def write_layout(source: SampleSource, root: Union[str, Path], split: str = "train",
                 task: Optional[Task] = None) -> Path:
    """SampleSource 를 레이아웃 디렉토리로 기록하고 layout.yaml 을 갱신한다"""
    root = Path(root)
    task = task or source.task
    inputs_dir = root / task.value / split / "inputs"
    targets_dir = root / task.value / split / "targets"
    inputs_dir.mkdir(parents=True, exist_ok=True)
    targets_dir.mkdir(parents=True, exist_ok=True)

    for stem, sample in zip(source.names(), source):
        write_image(inputs_dir / f"{stem}.tif", sample.input)
        if task is Task.SEGMENTATION:
            write_mask(targets_dir / f"{stem}.png", sample.target)
        else:
            write_image(targets_dir / f"{stem}.tif", sample.target)

    manifest_path = root / LAYOUT_FILE
    manifest = load_manifest(manifest_path) if manifest_path.exists() else {"format_version": LAYOUT_VERSION, "tasks": {}}
    entry = manifest["tasks"].setdefault(task.value, {
        "target": "mask" if task is Task.SEGMENTATION else "image",
        "splits": []
    })
    if split not in entry["splits"]:
        entry["splits"].append(split)
    with open(manifest_path, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=True)
    logger.info(f"레이아웃 기록: {task.value}/{split} {len(source)}개 → {root}")
    return manifest_path

