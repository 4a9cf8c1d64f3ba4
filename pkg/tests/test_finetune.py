import numpy as np
import pandas as pd
import pytest
import torch

from src.config.settings import HeadKind, InitMode, MetricKind, Task
from src.models.records import CheckpointRecord
from src.models.training import AugmentPolicy, TrainHyper
from src.repository.checkpoint_repository import checkpoint_name, list_checkpoints, load_checkpoint, save_checkpoint
from src.service.finetune_service import FinetuneRun, _initial_network, finetune, init_slug, predict
from src.service.model_zoo import build_generator, get_preset
from src.service.training_loop import snapshot
from src.utils import ModelSpecError, TransferError
from tests.conftest import disk_segmentation_source


def pretext_checkpoint(spec, directory, provenance="P(all)"):
    net = build_generator(spec, seed=3)
    record = CheckpointRecord(
        spec=spec, parameters=snapshot(net), epoch=5, best_val_metric=0.5, metric_kind=MetricKind.L1,
        task=Task.PRETEXT, head_kind=HeadKind.REGRESSION, provenance=provenance,
    )
    return save_checkpoint(record, directory / checkpoint_name(spec.name, "pretext", "all", 5))


def segmentation_run(spec, source, output_dir, hyper, **kwargs):
    return FinetuneRun(
        task=Task.SEGMENTATION, spec=spec, train_set=source, val_set=source, output_dir=output_dir,
        hyper=hyper, augment=AugmentPolicy(noise=False), **kwargs,
    )


class TestInitSlug:
    @pytest.mark.parametrize("provenance,slug", [("R", "R"), ("P(50k)", "P50k"), ("P(all)", "Pall")])
    def test_slug(self, provenance, slug):
        assert init_slug(provenance) == slug


class TestFinetuneSegmentation:
    def test_checkpoints_named_by_init(self, tmp_path, small_unet_spec, segmentation_source, fast_hyper):
        hyper = fast_hyper.model_copy(update={"epochs": 4, "checkpoint_interval_epochs": 2})
        net, records, series = finetune(segmentation_run(small_unet_spec, segmentation_source, tmp_path, hyper))
        assert [r.epoch for r in records] == [2, 4]
        assert all(r.provenance == "R" and r.task is Task.SEGMENTATION for r in records)
        assert all(r.head_kind is HeadKind.SEGMENTATION for r in records)
        names = sorted(p.name for p in list_checkpoints(tmp_path / "checkpoints"))
        assert names == ["U-Net_2_44_segmentation_R_e2.ckpt", "U-Net_2_44_segmentation_R_e4.ckpt"]
        assert series.kind is MetricKind.DICE
        assert all(0.0 <= v <= 1.0 for v in series.values.values())
        assert net.head_kind is HeadKind.SEGMENTATION

    def test_series_csv(self, tmp_path, small_unet_spec, segmentation_source, fast_hyper):
        finetune(segmentation_run(small_unet_spec, segmentation_source, tmp_path, fast_hyper))
        frame = pd.read_csv(tmp_path / "val_dice.csv")
        assert frame["epoch"].tolist() == [0, 1, 2]

    def test_pretrained_init(self, tmp_path, small_unet_spec, segmentation_source, fast_hyper):
        ckpt = pretext_checkpoint(small_unet_spec, tmp_path)
        hyper = fast_hyper.model_copy(update={"epochs": 1})
        runs = [
            finetune(segmentation_run(small_unet_spec, segmentation_source, tmp_path / name, hyper,
                                      init=InitMode.PRETRAINED, checkpoint=ckpt))
            for name in ("a", "b")
        ]
        (_, records_a, series_a), (_, _, series_b) = runs
        assert series_a.initial == series_b.initial
        assert records_a[0].provenance == "P(all)"
        assert (tmp_path / "a" / "checkpoints" / "U-Net_2_44_segmentation_Pall_e1.ckpt").exists()

    def test_pretrained_differs_from_random(self, tmp_path, small_unet_spec, segmentation_source, fast_hyper):
        ckpt = pretext_checkpoint(small_unet_spec, tmp_path)
        hyper = fast_hyper.model_copy(update={"epochs": 1})
        random_net, _, _ = finetune(segmentation_run(small_unet_spec, segmentation_source, tmp_path / "r", hyper))
        pretrained_net, _, _ = finetune(segmentation_run(small_unet_spec, segmentation_source, tmp_path / "p", hyper,
                                                         init=InitMode.PRETRAINED, checkpoint=ckpt))
        first = next(iter(random_net.state_dict()))
        assert not np.array_equal(random_net.state_dict()[first].numpy(), pretrained_net.state_dict()[first].numpy())

    @pytest.mark.slow
    def test_sixty_epochs_twelve_checkpoints_and_overfit(self, tmp_path):
        source = disk_segmentation_source(16, seed=5)
        spec = get_preset("U-Net_2_44", width=8)
        hyper = TrainHyper(epochs=60, batch_size=8, learning_rate=1e-3, seed=0)
        net, records, series = finetune(segmentation_run(spec, source, tmp_path, hyper))
        assert [r.epoch for r in records] == list(range(5, 65, 5))
        assert max(series.values.values()) >= 0.95


class TestFinetuneRegression:
    def test_denoise(self, tmp_path, small_unet_spec, tiny_corpus, fast_hyper):
        source = tiny_corpus.view(Task.DENOISE)
        run = FinetuneRun(task=Task.DENOISE, spec=small_unet_spec, train_set=source, val_set=source,
                          output_dir=tmp_path, hyper=fast_hyper, augment=AugmentPolicy.none())
        net, records, series = finetune(run)
        assert series.kind is MetricKind.L1
        assert records[-1].head_kind is HeadKind.REGRESSION
        assert (tmp_path / "checkpoints" / "U-Net_2_44_denoise_R_e2.ckpt").exists()
        assert (tmp_path / "val_l1.csv").exists()


class TestFinetuneErrors:
    def test_pretext_task_rejected(self, tmp_path, small_unet_spec, segmentation_source):
        with pytest.raises(ModelSpecError):
            FinetuneRun(task=Task.PRETEXT, spec=small_unet_spec, train_set=segmentation_source,
                        val_set=segmentation_source, output_dir=tmp_path)

    def test_pretrained_needs_checkpoint(self, tmp_path, small_unet_spec, segmentation_source):
        with pytest.raises(ModelSpecError):
            segmentation_run(small_unet_spec, segmentation_source, tmp_path, TrainHyper(), init=InitMode.PRETRAINED)

    def test_hrnet_checkpoint_into_unet(self, tmp_path, small_unet_spec, segmentation_source, fast_hyper):
        ckpt = pretext_checkpoint(get_preset("HRNet", width=4), tmp_path)
        run = segmentation_run(small_unet_spec, segmentation_source, tmp_path, fast_hyper,
                               init=InitMode.PRETRAINED, checkpoint=ckpt)
        with pytest.raises(TransferError):
            finetune(run)


class TestPredict:
    def test_segmentation_returns_binary_mask(self, tmp_path, small_unet_spec, segmentation_source, fast_hyper):
        net, _, _ = finetune(segmentation_run(small_unet_spec, segmentation_source, tmp_path, fast_hyper))
        mask = predict(net, segmentation_source[0].input[0])
        assert mask.shape == (1, 64, 64)
        assert set(np.unique(mask)) <= {0.0, 1.0}

    def test_regression_returns_image(self, small_unet_spec):
        net = build_generator(small_unet_spec)
        out = predict(net, np.random.default_rng(0).normal(size=(64, 64)))
        assert out.shape == (1, 64, 64)
        assert out.dtype == np.float32


class TestOddImageSizes:
    def test_validation_center_crops_to_crop_size(self, tmp_path, small_unet_spec, fast_hyper):
        source = disk_segmentation_source(8, size=66)
        run = FinetuneRun(task=Task.SEGMENTATION, spec=small_unet_spec, train_set=source, val_set=source,
                          output_dir=tmp_path, hyper=fast_hyper.model_copy(update={"epochs": 1}),
                          augment=AugmentPolicy(crop_size=64, noise=False))
        _, records, series = finetune(run)
        assert [r.epoch for r in records] == [1]
        assert 0.0 <= series.values[1] <= 1.0

    def test_without_crop_uses_largest_multiple(self, tmp_path, small_unet_spec, fast_hyper):
        source = disk_segmentation_source(8, size=67)
        run = FinetuneRun(task=Task.SEGMENTATION, spec=small_unet_spec, train_set=source, val_set=source,
                          output_dir=tmp_path, hyper=fast_hyper.model_copy(update={"epochs": 1}),
                          augment=AugmentPolicy.none())
        _, _, series = finetune(run)
        assert 0.0 <= series.initial <= 1.0


class TestInitialNetwork:
    def test_pretrained_body_matches_checkpoint(self, tmp_path, small_unet_spec, segmentation_source, fast_hyper):
        ckpt = pretext_checkpoint(small_unet_spec, tmp_path)
        run = segmentation_run(small_unet_spec, segmentation_source, tmp_path, fast_hyper,
                               init=InitMode.PRETRAINED, checkpoint=ckpt)
        net, provenance, report = _initial_network(run)
        saved = load_checkpoint(ckpt).parameters
        body = {name: value for name, value in net.state_dict().items() if not name.startswith("head.")}
        assert provenance == "P(all)"
        assert body and len(report.transferred) >= len(body)
        for name, value in body.items():
            assert torch.equal(value, saved[name]), name
        assert net.head_kind is HeadKind.SEGMENTATION

    def test_random_init_ignores_checkpoint(self, tmp_path, small_unet_spec, segmentation_source, fast_hyper):
        net, provenance, report = _initial_network(segmentation_run(small_unet_spec, segmentation_source, tmp_path,
                                                                    fast_hyper))
        assert (provenance, report) == ("R", None)
