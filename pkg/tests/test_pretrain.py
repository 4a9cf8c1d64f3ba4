import copy
import math

import pandas as pd
import pytest
import torch
from torch.optim import Adam

from src.config.settings import HeadKind, MetricKind, Task
from src.models.training import CorruptionPolicy, SplitSpec, SynthParams
from src.repository.checkpoint_repository import list_checkpoints, load_checkpoint
from src.service.model_zoo import build_discriminator, build_generator, discriminator_spec, get_preset
from src.service.preprocessing import split
from src.service.pretrain_service import PretrainRun, discriminator_step, generator_step, pretrain
from src.service.synth_service import synth_corpus
from src.utils import ModelSpecError, TrainingDivergedError


@pytest.fixture
def pretext_splits(tiny_corpus):
    train, val, _ = split(tiny_corpus.view(Task.PRETEXT), SplitSpec(train=12, val=4, test=0))
    return train, val


def make_run(spec, splits, output_dir, hyper, corruption=None, disc_width=4):
    train, val = splits
    return PretrainRun(
        generator_spec=spec,
        discriminator_spec=discriminator_spec(image_channels=spec.in_channels, width=disc_width),
        train_set=train,
        val_set=val,
        output_dir=output_dir,
        hyper=hyper,
        corruption=corruption or CorruptionPolicy(),
    )


class TestPretrainLoop:
    def test_checkpoint_per_interval(self, tmp_path, small_unet_spec, pretext_splits, fast_hyper, mild_corruption):
        _, records, series = pretrain(make_run(small_unet_spec, pretext_splits, tmp_path, fast_hyper, mild_corruption))
        assert [r.epoch for r in records] == [1, 2]
        assert series.epochs == [1, 2]
        assert series.initial is not None and math.isfinite(series.initial)
        for record in records:
            assert record.task is Task.PRETEXT
            assert record.head_kind is HeadKind.REGRESSION
            assert record.metric_kind is MetricKind.L1
            assert record.provenance == "P(all)"
            assert record.best_val_metric == min(
                v for e, v in series.values.items() if e <= record.epoch
            )

    def test_outputs_written(self, tmp_path, small_unet_spec, pretext_splits, fast_hyper, mild_corruption):
        pretrain(make_run(small_unet_spec, pretext_splits, tmp_path, fast_hyper, mild_corruption))
        losses = pd.read_csv(tmp_path / "train_losses.csv")
        assert list(losses.columns) == ["epoch", "d_loss", "g_adv", "l1", "val_l1"]
        assert losses["epoch"].tolist() == [1, 2]
        val = pd.read_csv(tmp_path / "val_l1.csv")
        assert val["epoch"].tolist() == [0, 1, 2]
        names = [p.name for p in list_checkpoints(tmp_path / "checkpoints")]
        assert sorted(names) == ["U-Net_2_44_pretext_all_e1.ckpt", "U-Net_2_44_pretext_all_e2.ckpt"]

    def test_saved_checkpoint_loads(self, tmp_path, small_unet_spec, pretext_splits, fast_hyper, mild_corruption):
        pretrain(make_run(small_unet_spec, pretext_splits, tmp_path, fast_hyper, mild_corruption))
        record = load_checkpoint(tmp_path / "checkpoints" / "U-Net_2_44_pretext_all_e2.ckpt")
        assert record.spec == small_unet_spec
        assert record.hyper.epochs == 2

    def test_identity_corruption_learns(self, tmp_path, small_unet_spec, pretext_splits, fast_hyper):
        hyper = fast_hyper.model_copy(update={"epochs": 3})
        _, _, series = pretrain(make_run(small_unet_spec, pretext_splits, tmp_path, hyper, CorruptionPolicy.identity()))
        assert min(series.values.values()) < series.initial

    def test_deterministic(self, tmp_path, small_unet_spec, pretext_splits, fast_hyper, mild_corruption):
        for name in ("a", "b"):
            pretrain(make_run(small_unet_spec, pretext_splits, tmp_path / name, fast_hyper, mild_corruption))
        for csv in ("train_losses.csv", "val_l1.csv"):
            assert (tmp_path / "a" / csv).read_bytes() == (tmp_path / "b" / csv).read_bytes()

    def test_subset_provenance(self, tmp_path, small_unet_spec, pretext_splits, fast_hyper, mild_corruption):
        hyper = fast_hyper.model_copy(update={"subset_size": 8, "epochs": 1})
        run = make_run(small_unet_spec, pretext_splits, tmp_path, hyper, mild_corruption)
        assert run.provenance == "P(8)"
        _, records, _ = pretrain(run)
        assert records[0].provenance == "P(8)"
        assert (tmp_path / "checkpoints" / "U-Net_2_44_pretext_8_e1.ckpt").exists()

    def test_odd_image_size_center_cropped(self, tmp_path, small_unet_spec, fast_hyper, mild_corruption):
        corpus = synth_corpus(SynthParams(count=6, image_size=66), seed=1)
        train, val, _ = split(corpus.view(Task.PRETEXT), SplitSpec(train=4, val=2, test=0))
        splits = (train, val)
        hyper = fast_hyper.model_copy(update={"epochs": 1})
        _, records, series = pretrain(make_run(small_unet_spec, splits, tmp_path, hyper, mild_corruption))
        assert [r.epoch for r in records] == [1]
        assert math.isfinite(series.values[1])

    @pytest.mark.slow
    def test_ten_epochs_every_five(self, tmp_path, small_unet_spec, pretext_splits, fast_hyper, mild_corruption):
        hyper = fast_hyper.model_copy(update={"epochs": 10, "checkpoint_interval_epochs": 5})
        _, records, series = pretrain(make_run(small_unet_spec, pretext_splits, tmp_path, hyper, mild_corruption))
        assert [r.epoch for r in records] == [5, 10]
        assert len(series) == 10


class TestPretrainErrors:
    def test_discriminator_channel_mismatch(self, tmp_path, small_unet_spec, pretext_splits, fast_hyper):
        train, val = pretext_splits
        with pytest.raises(ModelSpecError):
            PretrainRun(
                generator_spec=small_unet_spec,
                discriminator_spec=discriminator_spec(image_channels=3, width=4),
                train_set=train, val_set=val, output_dir=tmp_path, hyper=fast_hyper,
            )

    def test_generator_must_map_image_to_image(self, tmp_path, pretext_splits, fast_hyper):
        spec = get_preset("U-Net_2_44", in_channels=1, out_channels=2, width=4)
        with pytest.raises(ModelSpecError):
            make_run(spec, pretext_splits, tmp_path, fast_hyper)

    def test_diverged_loss(self, tmp_path, monkeypatch, small_unet_spec, pretext_splits, fast_hyper, mild_corruption):
        monkeypatch.setattr(
            "src.service.pretrain_service.l1_recon_loss", lambda pred, target: (pred * float("nan")).mean()
        )
        with pytest.raises(TrainingDivergedError, match="epoch 1 batch 0"):
            pretrain(make_run(small_unet_spec, pretext_splits, tmp_path, fast_hyper, mild_corruption))


def cloned(module):
    return {name: value.detach().clone() for name, value in module.state_dict().items()}


def unchanged(module, before) -> bool:
    return all(torch.equal(value, before[name]) for name, value in module.state_dict().items())


class TestAlternatingSteps:
    @pytest.fixture
    def gan(self, small_unet_spec):
        torch.manual_seed(0)
        generator = build_generator(small_unet_spec, seed=0)
        discriminator = build_discriminator(discriminator_spec(width=4), seed=1)
        inputs, targets = torch.randn(2, 1, 64, 64), torch.randn(2, 1, 64, 64)
        opt_g = Adam(generator.parameters(), lr=1e-2, betas=(0.5, 0.999))
        opt_d = Adam(discriminator.parameters(), lr=1e-2, betas=(0.5, 0.999))
        return generator, discriminator, opt_g, opt_d, inputs, targets

    def test_discriminator_step_leaves_generator(self, gan):
        generator, discriminator, _, opt_d, inputs, targets = gan
        g_before, d_before = cloned(generator), cloned(discriminator)
        discriminator_step(generator, discriminator, opt_d, inputs, targets)
        assert unchanged(generator, g_before)
        assert not unchanged(discriminator, d_before)

    def test_generator_step_leaves_discriminator(self, gan):
        generator, discriminator, opt_g, opt_d, inputs, targets = gan
        _, fake = discriminator_step(generator, discriminator, opt_d, inputs, targets)
        g_before, d_before = cloned(generator), cloned(discriminator)
        g_adv, l1 = generator_step(discriminator, opt_g, inputs, targets, fake, lambda_l1=100.0)
        assert unchanged(discriminator, d_before)
        assert not unchanged(generator, g_before)
        assert math.isfinite(float(g_adv)) and float(l1) > 0

    def test_stale_discriminator_gradients_cleared(self, gan):
        generator, discriminator, opt_g, opt_d, inputs, targets = gan
        _, fake = discriminator_step(generator, discriminator, opt_d, inputs, targets)
        generator_step(discriminator, opt_g, inputs, targets, fake, lambda_l1=100.0)
        fresh = copy.deepcopy(discriminator)
        for param in fresh.parameters():
            param.grad = None
        fresh_opt = Adam(fresh.parameters(), lr=1e-2, betas=(0.5, 0.999))
        fresh_opt.load_state_dict(opt_d.state_dict())

        discriminator_step(generator, discriminator, opt_d, inputs, targets)
        discriminator_step(generator, fresh, fresh_opt, inputs, targets)
        for name, value in discriminator.state_dict().items():
            assert torch.allclose(value, fresh.state_dict()[name], atol=1e-7), name
