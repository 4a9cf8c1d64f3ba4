"""
전처리 서비스
- 이미지 표준화, 패치 분할 (배경 패치 제외)
- 사전학습 입력 손상 (플립/회전 → 블러 → 가우시안 노이즈)
- 지도학습 증강 (리사이즈 → 크롭 → 플립/회전 → 입력 노이즈)
- 검증/테스트 중앙 크롭 (2^blocks 배수)
- train/val/test 분할과 부분집합 추출

모든 무작위 연산은 np.random.default_rng(seed) 로만 난수를 얻으므로 (입력, 정책, seed) 가 같으면 결과가 같다.
"""
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import torch
from scipy import ndimage
from torch.utils.data import Dataset

from src.config.settings import Task
from src.models.sample import SamplePair
from src.models.training import AugmentPolicy, CorruptionPolicy, SplitSpec
from src.repository.base import SampleSource
from src.repository.dataset_repository import SubsetDataset
from src.utils import AugmentationError, DatasetError
from src.utils.logger import get_logger

logger = get_logger(__name__)

SIGMA_FLOOR = 1e-8


def _as_grid(img: np.ndarray) -> np.ndarray:
    """(H, W) 또는 (C, H, W) → (C, H, W)"""
    img = np.asarray(img)
    if img.ndim == 2:
        return img[None]
    if img.ndim != 3:
        raise DatasetError(f"이미지는 (H, W) 또는 (C, H, W) 여야 합니다: shape={img.shape}")
    return img


def standardize(img: np.ndarray) -> np.ndarray:
    """이미지 단위 평균 0, 분산 1 (모집단 σ). σ < 1e-8 인 상수 이미지는 0 으로."""
    values = np.asarray(img, dtype=np.float64)
    mean = values.mean()
    std = values.std()
    if std < SIGMA_FLOOR:
        return np.zeros_like(values, dtype=np.float32)
    return ((values - mean) / std).astype(np.float32)


# === 패치 ===

def _tile_origins(height: int, width: int, patch: int) -> List[Tuple[int, int]]:
    if patch <= 0:
        raise DatasetError(f"패치 크기는 양수여야 합니다: {patch}")
    if patch > min(height, width):
        raise DatasetError(f"패치 크기 {patch} 가 이미지({height}x{width})보다 큽니다.")
    return [(top, left)
            for top in range(0, height - patch + 1, patch)
            for left in range(0, width - patch + 1, patch)]


def _is_background(mask_patch: np.ndarray, bg_threshold: float) -> bool:
    return float(np.mean(mask_patch > 0)) <= bg_threshold


def extract_patches(img: np.ndarray, patch: int, reject_background: bool = False, bg_threshold: float = 0.0,
                    mask: Optional[np.ndarray] = None) -> List[np.ndarray]:
    """겹치지 않는 row-major 타일링. reject_background 이고 mask 가 주어지면 전경 비율 ≤ bg_threshold 인 패치 제외"""
    return [image_patch for image_patch, _ in
            extract_patch_pairs(img, mask, patch, reject_background=reject_background, bg_threshold=bg_threshold)]


def extract_patch_pairs(img: np.ndarray, mask: Optional[np.ndarray], patch: int, reject_background: bool = True,
                        bg_threshold: float = 0.0) -> List[Tuple[np.ndarray, Optional[np.ndarray]]]:
    """이미지 패치와 같은 위치의 마스크 패치 쌍 목록"""
    grid = _as_grid(img)
    mask_grid = _as_grid(mask) if mask is not None else None
    if mask_grid is not None and mask_grid.shape[-2:] != grid.shape[-2:]:
        raise DatasetError(f"이미지와 마스크 크기가 다릅니다: {grid.shape} vs {mask_grid.shape}")

    pairs = []
    for top, left in _tile_origins(grid.shape[-2], grid.shape[-1], patch):
        window = (slice(None), slice(top, top + patch), slice(left, left + patch))
        mask_patch = mask_grid[window].copy() if mask_grid is not None else None
        if reject_background and mask_patch is not None and _is_background(mask_patch, bg_threshold):
            continue
        pairs.append((grid[window].copy(), mask_patch))
    return pairs


def prepare_patches(img: np.ndarray, patch: int, mask: Optional[np.ndarray] = None, reject_background: bool = True,
                    bg_threshold: float = 0.0) -> List[SamplePair]:
    """원본 대형 이미지를 표준화 후 패치로 분할.

    mask 가 있으면 segmentation 샘플, 없으면 입력=타깃 인 pretext 샘플을 만든다.
    """
    pairs = extract_patch_pairs(standardize(img), mask, patch, reject_background, bg_threshold)
    samples = []
    for index, (image_patch, mask_patch) in enumerate(pairs):
        if mask_patch is None:
            samples.append(SamplePair(image_patch, image_patch.copy(), Task.PRETEXT, {"patch": index}))
        else:
            binary = (mask_patch > 0).astype(np.float32)
            samples.append(SamplePair(image_patch, binary, Task.SEGMENTATION, {"patch": index}))
    return samples


class PatchSource(SampleSource):
    """각 샘플을 겹치지 않는 patch×patch 타일로 나눈 SampleSource.

    segmentation 샘플은 reject_background 이면 전경 비율 ≤ bg_threshold 인 타일을 뺀다.
    타일 위치만 기억하고 픽셀은 get 에서 원본을 다시 읽어 자른다.
    """

    def __init__(self, source: SampleSource, patch: int, reject_background: bool = True, bg_threshold: float = 0.0):
        self.source = source
        self.patch = patch
        self.task = source.task
        self.tiles: List[Tuple[int, int, int]] = []
        rejected = 0
        for index, sample in enumerate(source):
            grid = _as_grid(sample.input)
            mask = _as_grid(sample.target) if sample.task is Task.SEGMENTATION else None
            for top, left in _tile_origins(grid.shape[-2], grid.shape[-1], patch):
                tile_mask = mask[:, top:top + patch, left:left + patch] if mask is not None else None
                if reject_background and tile_mask is not None and _is_background(tile_mask, bg_threshold):
                    rejected += 1
                    continue
                self.tiles.append((index, top, left))
        logger.info(f"패치 분할: 샘플 {len(source)}개 → 타일 {len(self.tiles)}개 (patch={patch}, 배경 제외 {rejected}개)")

    def __len__(self) -> int:
        return len(self.tiles)

    def names(self) -> List[str]:
        stems = self.source.names()
        return [f"{stems[index]}_y{top}_x{left}" for index, top, left in self.tiles]

    def get(self, index: int) -> SamplePair:
        source_index, top, left = self.tiles[index]
        sample = self.source[source_index]
        window = (slice(None), slice(top, top + self.patch), slice(left, left + self.patch))
        return SamplePair(_as_grid(sample.input)[window].copy(), _as_grid(sample.target)[window].copy(),
                          sample.task, dict(sample.meta, patch=(top, left)))


# === 기하 변환 ===

def _draw_geometry(rng: np.random.Generator, flip: bool, rotations: Sequence[int]) -> Tuple[bool, bool, int]:
    flip_lr, flip_ud = rng.random(2) < 0.5
    k = int(rng.choice(rotations)) // 90 if rotations else 0
    if not flip:
        flip_lr = flip_ud = False
    return bool(flip_lr), bool(flip_ud), k % 4


def _apply_geometry(grid: np.ndarray, flip_lr: bool, flip_ud: bool, k: int) -> np.ndarray:
    if flip_lr:
        grid = np.flip(grid, axis=-1)
    if flip_ud:
        grid = np.flip(grid, axis=-2)
    if k:
        grid = np.rot90(grid, k=k, axes=(-2, -1))
    return np.ascontiguousarray(grid)


def _uniform(rng: np.random.Generator, bounds: Tuple[float, float]) -> float:
    lo, hi = bounds
    return float(rng.uniform(lo, hi)) if hi > lo else float(lo)


# === 손상 (pretext) ===

def _corrupt(img: np.ndarray, policy: CorruptionPolicy, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """(손상된 입력, 같은 기하 변환만 적용된 원본) 반환"""
    rng = np.random.default_rng(seed)
    grid = _as_grid(img).astype(np.float32)

    rotations = [0, 90, 180, 270] if policy.rotate else [0]
    geometry = _draw_geometry(rng, policy.flip, rotations)
    clean = _apply_geometry(grid, *geometry)

    blur_sigma = _uniform(rng, policy.blur_sigma_range)
    noise_sigma = _uniform(rng, policy.gaussian_noise_sigma_range)

    corrupted = clean
    if blur_sigma > 0:
        corrupted = ndimage.gaussian_filter(corrupted, sigma=(0, blur_sigma, blur_sigma), mode="reflect")
    if noise_sigma > 0:
        corrupted = corrupted + rng.normal(0.0, noise_sigma, size=corrupted.shape)
    return corrupted.astype(np.float32), clean


def corrupt(img: np.ndarray, policy: CorruptionPolicy, seed: int) -> np.ndarray:
    """pretext 입력용 손상 사본 (원본은 pretext 타깃)"""
    corrupted, _ = _corrupt(img, policy, seed)
    return corrupted


def corrupt_pair(img: np.ndarray, policy: CorruptionPolicy, seed: int) -> SamplePair:
    """손상 입력 + 같은 플립/회전이 적용된 깨끗한 타깃"""
    corrupted, clean = _corrupt(img, policy, seed)
    return SamplePair(corrupted, clean, Task.PRETEXT, {"seed": seed})


# === 증강 (지도학습) ===

def _resize(grid: np.ndarray, scale: float, order: int) -> np.ndarray:
    return ndimage.zoom(grid, zoom=(1, scale, scale), order=order, mode="nearest")


def augment(sample: SamplePair, policy: AugmentPolicy, seed: int) -> SamplePair:
    """기하 변환은 입력/타깃에 동일하게, 노이즈는 입력에만 적용"""
    rng = np.random.default_rng(seed)
    image = _as_grid(sample.input).astype(np.float32)
    target = _as_grid(sample.target).astype(np.float32)
    # 마스크는 보간하지 않음
    target_order = 0 if sample.task is Task.SEGMENTATION else 1

    scale = _uniform(rng, policy.resize_scale_range)
    if scale != 1.0:
        image = _resize(image, scale, order=1)
        target = _resize(target, scale, order=target_order)

    if policy.crop_size is not None:
        height, width = image.shape[-2:]
        crop = policy.crop_size
        if crop > min(height, width):
            raise AugmentationError(f"크롭 크기 {crop} 가 리사이즈 후 이미지({height}x{width})보다 큽니다.")
        top = int(rng.integers(0, height - crop + 1))
        left = int(rng.integers(0, width - crop + 1))
        image = image[:, top:top + crop, left:left + crop]
        target = target[:, top:top + crop, left:left + crop]

    geometry = _draw_geometry(rng, policy.flip, policy.rotations)
    image = _apply_geometry(image, *geometry)
    target = _apply_geometry(target, *geometry)

    if policy.noise:
        sigma = _uniform(rng, policy.noise_sigma_range)
        if sigma > 0:
            image = (image + rng.normal(0.0, sigma, size=image.shape)).astype(np.float32)

    meta = dict(sample.meta, augment_seed=seed)
    return SamplePair(image, target, sample.task, meta)


# === 평가 크롭 ===

def center_crop(sample: SamplePair, height: int, width: int) -> SamplePair:
    """입력/타깃 중앙 크롭 (무작위성 없음)"""
    image = _as_grid(sample.input)
    target = _as_grid(sample.target)
    full_height, full_width = image.shape[-2:]
    if not (0 < height <= full_height and 0 < width <= full_width):
        raise AugmentationError(f"중앙 크롭 {height}x{width} 가 이미지({full_height}x{full_width}) 범위를 벗어납니다.")
    top = (full_height - height) // 2
    left = (full_width - width) // 2
    window = (slice(None), slice(top, top + height), slice(left, left + width))
    return SamplePair(np.ascontiguousarray(image[window]), np.ascontiguousarray(target[window]),
                      sample.task, sample.meta)


def eval_crop_size(height: int, width: int, crop_size: Optional[int], multiple: int) -> Tuple[int, int]:
    """검증/테스트 크롭 크기: min(crop_size, 변) 을 multiple 의 배수로 내림"""
    sizes = []
    for side in (height, width):
        side = min(crop_size, side) if crop_size is not None else side
        side -= side % multiple
        if side <= 0:
            raise AugmentationError(f"이미지({height}x{width})에서 {multiple} 의 배수 크기를 잘라낼 수 없습니다.")
        sizes.append(side)
    return sizes[0], sizes[1]


# === 분할 ===

def _split_counts(total: int, spec: SplitSpec) -> Tuple[int, int, int]:
    values = (spec.train, spec.val, spec.test)
    if spec.is_fraction:
        n_train, n_val, n_test = (int(np.floor(v * total + 1e-9)) for v in values)
        # 비율 합이 1 이면 내림으로 남는 샘플은 train 으로
        if abs(sum(values) - 1.0) < 1e-9:
            n_train = total - n_val - n_test
        return n_train, n_val, n_test
    return tuple(int(v) for v in values)


def split(dataset: SampleSource, spec: SplitSpec) -> Tuple[SubsetDataset, SubsetDataset, SubsetDataset]:
    """시드 고정 셔플로 서로소인 (train, val, test) 분할"""
    total = len(dataset)
    n_train, n_val, n_test = _split_counts(total, spec)
    requested = n_train + n_val + n_test
    if requested > total:
        raise DatasetError(f"분할 요청({n_train}/{n_val}/{n_test}, 합 {requested})이 데이터셋 크기 {total} 를 초과합니다.")
    if requested < total:
        logger.warning(f"분할에 포함되지 않은 샘플 {total - requested}개")

    order = np.random.default_rng(spec.seed).permutation(total)
    bounds = np.cumsum([0, n_train, n_val, n_test])
    parts = tuple(
        SubsetDataset(dataset, sorted(int(i) for i in order[start:end]))
        for start, end in zip(bounds[:-1], bounds[1:])
    )
    logger.info(f"데이터 분할: train {n_train}, val {n_val}, test {n_test} (seed={spec.seed})")
    return parts


def subset(dataset: SampleSource, n: int, seed: int = 0) -> SubsetDataset:
    """시드 고정 무작위 부분집합 (사전학습 50K/100K/200K 프로토콜)"""
    if n <= 0 or n > len(dataset):
        raise DatasetError(f"부분집합 크기 {n} 는 1 이상 {len(dataset)} 이하여야 합니다.")
    order = np.random.default_rng(seed).permutation(len(dataset))[:n]
    return SubsetDataset(dataset, sorted(int(i) for i in order))


# === torch 어댑터 ===

def sample_seed(seed: int, epoch: int, index: int) -> int:
    """(seed, epoch, index) 별 독립 난수 시드"""
    return int(np.random.SeedSequence([seed, epoch, index]).generate_state(1)[0])


class TorchSampleDataset(Dataset):
    """SampleSource → (input, target) 텐서 쌍.

    입력과 회귀 타깃은 각각 표준화된다. transform(sample, seed) 는 corrupt_pair/augment 를 감싼 순수 함수이며
    시드는 (seed, epoch, index) 에서 유도되므로 같은 설정으로 다시 돌리면 같은 배치가 나온다.
    """

    def __init__(self, source: SampleSource, transform: Optional[Callable[[SamplePair, int], SamplePair]] = None,
                 seed: int = 0):
        self.source = source
        self.transform = transform
        self.seed = seed
        self.epoch = 0

    def set_epoch(self, epoch: int):
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.source)

    def __getitem__(self, index: int) -> Tuple[torch.Tensor, torch.Tensor]:
        sample = self.source[index]
        target = sample.target if sample.task is Task.SEGMENTATION else standardize(sample.target)
        sample = SamplePair(standardize(sample.input), target, sample.task, sample.meta)
        if self.transform is not None:
            sample = self.transform(sample, sample_seed(self.seed, self.epoch, index))
        return (torch.from_numpy(np.ascontiguousarray(sample.input, dtype=np.float32)),
                torch.from_numpy(np.ascontiguousarray(sample.target, dtype=np.float32)))


def pretext_transform(policy: CorruptionPolicy) -> Callable[[SamplePair, int], SamplePair]:
    """표준화된 이미지 → (손상 입력, 원본 타깃)"""
    def transform(sample: SamplePair, seed: int) -> SamplePair:
        return corrupt_pair(sample.input, policy, seed)
    return transform


def augment_transform(policy: AugmentPolicy) -> Callable[[SamplePair, int], SamplePair]:
    def transform(sample: SamplePair, seed: int) -> SamplePair:
        return augment(sample, policy, seed)
    return transform


def eval_crop_transform(crop_size: Optional[int], multiple: int) -> Callable[[SamplePair, int], SamplePair]:
    """검증/테스트용 결정론적 중앙 크롭 (seed 무시)"""
    def transform(sample: SamplePair, seed: int) -> SamplePair:
        height, width = _as_grid(sample.input).shape[-2:]
        return center_crop(sample, *eval_crop_size(height, width, crop_size, multiple))
    return transform


def chain(*transforms: Callable[[SamplePair, int], SamplePair]) -> Callable[[SamplePair, int], SamplePair]:
    """같은 seed 로 변환을 순서대로 적용"""
    def transform(sample: SamplePair, seed: int) -> SamplePair:
        for step in transforms:
            sample = step(sample, seed)
        return sample
    return transform
