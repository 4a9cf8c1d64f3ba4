"""
EM 유사 합성 코퍼스 생성 서비스

샘플마다 정렬된 5개 그리드를 만든다:
- observed          : 스캔 흔들림 + Poisson(선량 제한) + 가우시안 노이즈가 더해진 (격자 + 배경) 관측 이미지
- denoise           : 노이즈 없는 격자 + 배경
- noise_bg_removal  : 노이즈/배경 없는 격자
- superres          : 원자 블롭 σ 를 줄인 같은 해상도의 선명한 격자
- segmentation      : 입자 영역 이진 마스크
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy import ndimage

from src.config.settings import Task
from src.models.sample import SamplePair
from src.models.training import SynthParams
from src.repository.base import SampleSource
from src.utils import SynthesisError
from src.utils.logger import get_logger

logger = get_logger(__name__)

AMORPHOUS_SIGMA = 1.5


@dataclass
class SynthSample:
    grids: Dict[Task, np.ndarray]
    particles: List[Tuple[float, float, float]] = field(default_factory=list)
    atoms: int = 0
    spacing: float = 0.0


class SyntheticCorpus(SampleSource):
    """합성 샘플 집합. 기본 태스크는 pretext (관측 이미지 → 관측 이미지)."""

    def __init__(self, samples: List[SynthSample], params: SynthParams, seed: int, task: Task = Task.PRETEXT):
        self.samples = samples
        self.params = params
        self.seed = seed
        self.task = task

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def tasks(self) -> List[Task]:
        return list(Task)

    def get(self, index: int) -> SamplePair:
        sample = self.samples[index]
        meta = {"index": index, "atoms": sample.atoms, "particles": sample.particles}
        return SamplePair(sample.grids[Task.PRETEXT], sample.grids[self.task], self.task, meta)

    def view(self, task: Task) -> "SyntheticCorpus":
        """같은 샘플을 다른 태스크의 (입력, 타깃) 으로 보는 뷰"""
        return SyntheticCorpus(self.samples, self.params, self.seed, task)


def _check_params(params: SynthParams):
    if params.particle_count_range[1] == 0:
        raise SynthesisError("입자 수 범위 상한이 0 이면 원자가 하나도 생성되지 않습니다.")
    if params.particle_radius_range[1] <= 0:
        raise SynthesisError("입자 반지름이 0 이면 원자가 하나도 생성되지 않습니다.")
    if params.lattice_spacing_range[0] <= 0:
        raise SynthesisError("격자 간격은 양수여야 합니다.")
    if params.lattice_spacing_range[0] >= params.image_size:
        raise SynthesisError(f"격자 간격 {params.lattice_spacing_range[0]} 이 이미지 크기 {params.image_size} 이상입니다.")


def _particle_mask(rng: np.random.Generator, params: SynthParams) -> Tuple[np.ndarray, List[Tuple[float, float, float]]]:
    size = params.image_size
    lo, hi = params.particle_count_range
    count = int(rng.integers(lo, hi + 1))
    yy, xx = np.mgrid[0:size, 0:size]
    mask = np.zeros((size, size), dtype=bool)
    particles = []
    for _ in range(count):
        radius = float(rng.uniform(*params.particle_radius_range))
        margin = min(radius, size / 2)
        cy, cx = rng.uniform(margin, size - margin, size=2)
        mask |= (yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2
        particles.append((float(cy), float(cx), radius))
    return mask, particles


def _lattice_sites(rng: np.random.Generator, params: SynthParams, mask: np.ndarray) -> Tuple[np.ndarray, float]:
    size = params.image_size
    spacing = float(rng.uniform(*params.lattice_spacing_range))
    theta = float(rng.uniform(0, math.pi / 2))
    offset = rng.uniform(0, spacing, size=2)

    reach = int(math.ceil(size * math.sqrt(2) / spacing)) + 1
    m, n = np.meshgrid(np.arange(-reach, reach + 1), np.arange(-reach, reach + 1), indexing="ij")
    a = spacing * np.array([math.cos(theta), math.sin(theta)])
    b = spacing * np.array([-math.sin(theta), math.cos(theta)])
    points = size / 2 + offset + m.reshape(-1, 1) * a + n.reshape(-1, 1) * b
    sites = np.rint(points).astype(int)

    inside = (sites >= 0).all(axis=1) & (sites < size).all(axis=1)
    sites = sites[inside]
    sites = sites[mask[sites[:, 0], sites[:, 1]]]
    return sites, spacing


def _render_atoms(sites: np.ndarray, size: int, sigma: float) -> np.ndarray:
    """점 원자 → 최고치 ≈ 1 인 가우시안 블롭"""
    delta = np.zeros((size, size), dtype=np.float64)
    np.add.at(delta, (sites[:, 0], sites[:, 1]), 1.0)
    return ndimage.gaussian_filter(delta, sigma=sigma, mode="constant") * (2 * math.pi * sigma ** 2)


def _amorphous(rng: np.random.Generator, params: SynthParams) -> np.ndarray:
    size = params.image_size
    if params.amorphous_amplitude == 0:
        return np.zeros((size, size))
    texture = ndimage.gaussian_filter(rng.normal(size=(size, size)), sigma=AMORPHOUS_SIGMA, mode="wrap")
    texture /= max(texture.std(), 1e-8)
    return params.amorphous_amplitude * texture


def _background(rng: np.random.Generator, params: SynthParams) -> np.ndarray:
    """저차 2D 다항식(선형/비선형) + 저주파 정현파"""
    size = params.image_size
    if params.background_amplitude == 0:
        return np.zeros((size, size))
    y, x = np.mgrid[-1:1:size * 1j, -1:1:size * 1j]
    c = rng.uniform(-1, 1, size=6)
    poly = c[0] + c[1] * x + c[2] * y + c[3] * x ** 2 + c[4] * x * y + c[5] * y ** 2
    fx, fy = rng.uniform(0.25, 0.75, size=2)
    phase = rng.uniform(0, 2 * math.pi)
    wave = np.sin(math.pi * (fx * x + fy * y) + phase)
    bg = poly + wave
    bg -= bg.mean()
    return params.background_amplitude * bg / max(np.abs(bg).max(), 1e-8)


def _observe(rng: np.random.Generator, clean: np.ndarray, params: SynthParams) -> np.ndarray:
    """스캔 라인 흔들림 → Poisson 샷 노이즈 → 가우시안 판독 노이즈"""
    level = params.noise_level
    if level == 0:
        return clean.copy()

    image = clean.copy()
    jitter = int(round(params.scan_jitter_px * level))
    if jitter > 0:
        shifts = rng.integers(-jitter, jitter + 1, size=image.shape[0])
        image = np.stack([np.roll(row, int(shift)) for row, shift in zip(image, shifts)])

    dose = params.poisson_dose / level ** 2
    floor = image.min()
    image = rng.poisson((image - floor) * dose) / dose + floor

    return image + rng.normal(0.0, level, size=image.shape)


def _synth_sample(rng: np.random.Generator, params: SynthParams) -> SynthSample:
    size = params.image_size
    mask, particles = _particle_mask(rng, params)
    sites, spacing = _lattice_sites(rng, params, mask)

    amorphous = _amorphous(rng, params)
    lattice = _render_atoms(sites, size, params.atom_sigma) + amorphous
    sharp = _render_atoms(sites, size, params.atom_sigma * params.sharpen_factor) + amorphous
    background = _background(rng, params)
    observed = _observe(rng, lattice + background, params)

    def grid(values: np.ndarray) -> np.ndarray:
        return values.astype(np.float32)[None]

    grids = {
        Task.PRETEXT: grid(observed),
        Task.DENOISE: grid(lattice + background),
        Task.NOISE_BG_REMOVAL: grid(lattice),
        Task.SUPERRES: grid(sharp),
        Task.SEGMENTATION: grid(mask),
    }
    return SynthSample(grids=grids, particles=particles, atoms=len(sites), spacing=spacing)


def synth_corpus(params: SynthParams, seed: int = 0) -> SyntheticCorpus:
    """seed 로 완전히 결정되는 합성 코퍼스 생성"""
    _check_params(params)
    samples = [
        _synth_sample(np.random.default_rng(np.random.SeedSequence([seed, index])), params)
        for index in range(params.count)
    ]
    total_atoms = sum(sample.atoms for sample in samples)
    if total_atoms == 0:
        raise SynthesisError("생성된 원자가 없습니다. 입자 반지름 또는 격자 간격을 조정하세요.")
    logger.info(f"합성 코퍼스 생성: {params.count}개 ({params.image_size}px, 원자 {total_atoms}개, seed={seed})")
    return SyntheticCorpus(samples, params, seed)
