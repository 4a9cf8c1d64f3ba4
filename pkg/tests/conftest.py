"""공용 테스트 픽스처: 작은 합성 코퍼스, 메모리 샘플 집합, 빠른 학습 설정"""
from typing import List

import numpy as np
import pytest

from src.config.settings import Task
from src.models.sample import SamplePair
from src.models.training import CorruptionPolicy, SynthParams, TrainHyper
from src.repository.base import SampleSource
from src.service.model_zoo import get_preset
from src.service.synth_service import synth_corpus


class InMemorySource(SampleSource):
    """SamplePair 리스트를 감싼 SampleSource"""

    def __init__(self, samples: List[SamplePair], task: Task):
        self.samples = samples
        self.task = task

    def __len__(self) -> int:
        return len(self.samples)

    def get(self, index: int) -> SamplePair:
        return self.samples[index]


def disk_segmentation_source(count: int, size: int = 64, seed: int = 0) -> InMemorySource:
    """원판 마스크 + 약한 노이즈 이미지로 이루어진 쉬운 세그멘테이션 집합"""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size]
    samples = []
    for _ in range(count):
        cy, cx = rng.uniform(size * 0.3, size * 0.7, size=2)
        radius = rng.uniform(size * 0.15, size * 0.3)
        mask = ((yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2).astype(np.float32)[None]
        image = (2.0 * mask + rng.normal(0.0, 0.1, size=mask.shape)).astype(np.float32)
        samples.append(SamplePair(image, mask, Task.SEGMENTATION))
    return InMemorySource(samples, Task.SEGMENTATION)


@pytest.fixture
def tiny_params() -> SynthParams:
    return SynthParams(count=16, image_size=64)


@pytest.fixture
def tiny_corpus(tiny_params):
    return synth_corpus(tiny_params, seed=0)


@pytest.fixture
def segmentation_source() -> InMemorySource:
    return disk_segmentation_source(8)


@pytest.fixture
def fast_hyper() -> TrainHyper:
    return TrainHyper(epochs=2, batch_size=8, learning_rate=1e-3, checkpoint_interval_epochs=1, seed=0)


@pytest.fixture
def mild_corruption() -> CorruptionPolicy:
    return CorruptionPolicy(gaussian_noise_sigma_range=(0.0, 0.2), blur_sigma_range=(0.0, 1.0))


@pytest.fixture
def small_unet_spec():
    return get_preset("U-Net_2_44", width=4)
