import math

import numpy as np
import pytest

from src.config.settings import Task
from src.models.training import SynthParams
from src.service.synth_service import synth_corpus
from src.utils import DatasetError, SynthesisError


class TestSynthCorpus:
    def test_count_and_aligned_grids(self, tiny_corpus):
        assert len(tiny_corpus) == 16
        for sample in tiny_corpus.samples:
            assert set(sample.grids) == set(Task)
            assert all(grid.shape == (1, 64, 64) for grid in sample.grids.values())

    def test_views_share_input(self, tiny_corpus):
        pretext = tiny_corpus[3]
        for task in Task:
            pair = tiny_corpus.view(task)[3]
            assert pair.task is task
            np.testing.assert_array_equal(pair.input, pretext.input)
        assert tiny_corpus.view(Task.SEGMENTATION).tasks == list(Task)

    def test_noiseless_input_equals_denoise_target(self):
        corpus = synth_corpus(SynthParams(count=4, noise_level=0.0, background_amplitude=0.0), seed=2)
        for pair in corpus.view(Task.DENOISE):
            np.testing.assert_array_equal(pair.input, pair.target)

    def test_background_removal_target_has_no_background(self):
        params = SynthParams(count=2, noise_level=0.0, background_amplitude=0.5)
        corpus = synth_corpus(params, seed=0)
        for sample in corpus.samples:
            difference = sample.grids[Task.DENOISE] - sample.grids[Task.NOISE_BG_REMOVAL]
            assert np.abs(difference).max() > 0

    def test_mask_fraction_bounded_by_particle_area(self):
        params = SynthParams(count=8, image_size=64, particle_count_range=(1, 3), particle_radius_range=(8, 16))
        corpus = synth_corpus(params, seed=1)
        for sample in corpus.samples:
            mask = sample.grids[Task.SEGMENTATION][0]
            assert set(np.unique(mask)) <= {0.0, 1.0}
            fraction = mask.mean()
            # 픽셀화 오차를 둘레만큼 허용
            upper = sum(math.pi * (r + 1) ** 2 for _, _, r in sample.particles) / 64 ** 2
            lower = max(math.pi * (r - 1) ** 2 for _, _, r in sample.particles) / 64 ** 2
            assert lower <= fraction <= upper

    def test_superres_target_sharper(self):
        corpus = synth_corpus(SynthParams(count=2, noise_level=0.0, amorphous_amplitude=0.0), seed=4)
        sample = corpus.samples[0]
        # 같은 원자 위치, σ 만 sharpen_factor 배: 블롭 질량은 σ² 에 비례
        ratio = sample.grids[Task.SUPERRES].sum() / sample.grids[Task.NOISE_BG_REMOVAL].sum()
        assert 0.2 < ratio < 0.3

    def test_seeded(self, tiny_params):
        a = synth_corpus(tiny_params, seed=7)
        b = synth_corpus(tiny_params, seed=7)
        c = synth_corpus(tiny_params, seed=8)
        np.testing.assert_array_equal(a[5].input, b[5].input)
        assert not np.array_equal(a[5].input, c[5].input)

    def test_noise_raises_residual(self):
        quiet = synth_corpus(SynthParams(count=2, noise_level=0.0), seed=0)
        loud = synth_corpus(SynthParams(count=2, noise_level=0.5), seed=0)
        quiet_residual = np.abs(quiet.view(Task.DENOISE)[0].input - quiet.view(Task.DENOISE)[0].target).mean()
        loud_residual = np.abs(loud.view(Task.DENOISE)[0].input - loud.view(Task.DENOISE)[0].target).mean()
        assert quiet_residual == 0
        assert loud_residual > 0.1


class TestDegenerateParams:
    def test_no_particles(self):
        with pytest.raises(SynthesisError):
            synth_corpus(SynthParams(count=2, particle_count_range=(0, 0)))

    def test_spacing_larger_than_image(self):
        with pytest.raises(SynthesisError):
            synth_corpus(SynthParams(count=2, image_size=32, lattice_spacing_range=(40.0, 50.0)))

    def test_synthesis_error_is_dataset_error(self):
        assert issubclass(SynthesisError, DatasetError)
