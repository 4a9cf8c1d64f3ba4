import hashlib
import io

import pytest
import torch

from src.config.settings import HeadKind, MetricKind, Task
from src.models.records import CHECKPOINT_FORMAT_VERSION, CheckpointRecord
from src.models.training import TrainHyper
from src.repository.checkpoint_repository import (
    MAGIC, checkpoint_name, list_checkpoints, load_checkpoint, save_checkpoint
)
from src.service.model_zoo import build_generator, get_preset, network_from_record, replace_head
from src.service.training_loop import snapshot
from src.utils import CheckpointError, CheckpointVersionError, ChecksumError


def make_record(net, epoch: int = 5, task: Task = Task.PRETEXT, **overrides) -> CheckpointRecord:
    fields = dict(
        spec=net.spec,
        parameters=snapshot(net),
        epoch=epoch,
        best_val_metric=0.123456789,
        metric_kind=MetricKind.L1,
        task=task,
        head_kind=net.head_kind,
        provenance="P(all)",
        hyper=TrainHyper(epochs=10),
        source_epoch=epoch - 1,
    )
    fields.update(overrides)
    return CheckpointRecord(**fields)


class TestCheckpointRoundTrip:
    def test_forward_outputs_equal(self, tmp_path, small_unet_spec):
        net = build_generator(small_unet_spec, seed=4)
        path = save_checkpoint(make_record(net), tmp_path / "a.ckpt")
        restored = network_from_record(load_checkpoint(path))
        x = torch.randn(2, 1, 64, 64)
        net.eval()
        restored.eval()
        with torch.no_grad():
            assert torch.allclose(net(x), restored(x), atol=1e-7, rtol=0)

    def test_metadata_restored(self, tmp_path, small_unet_spec):
        record = make_record(build_generator(small_unet_spec))
        loaded = load_checkpoint(save_checkpoint(record, tmp_path / "a.ckpt"))
        assert loaded.metadata() == record.metadata()
        assert loaded.format_version == CHECKPOINT_FORMAT_VERSION
        assert loaded.best_val_metric == 0.123456789

    def test_segmentation_head_restored(self, tmp_path, small_unet_spec):
        net = replace_head(build_generator(small_unet_spec), HeadKind.SEGMENTATION, seed=9)
        record = make_record(net, task=Task.SEGMENTATION, metric_kind=MetricKind.DICE, provenance="R")
        restored = network_from_record(load_checkpoint(save_checkpoint(record, tmp_path / "s.ckpt")))
        assert restored.head_kind is HeadKind.SEGMENTATION
        assert torch.equal(restored.head.logits.weight, net.head.logits.weight)

    def test_atomic_write_leaves_no_temp_files(self, tmp_path, small_unet_spec):
        save_checkpoint(make_record(build_generator(small_unet_spec)), tmp_path / "a.ckpt")
        assert [p.name for p in tmp_path.iterdir()] == ["a.ckpt"]


class TestCorruptCheckpoints:
    def test_truncated_file(self, tmp_path, small_unet_spec):
        path = save_checkpoint(make_record(build_generator(small_unet_spec)), tmp_path / "a.ckpt")
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(ChecksumError):
            load_checkpoint(path)

    def test_flipped_byte(self, tmp_path, small_unet_spec):
        path = save_checkpoint(make_record(build_generator(small_unet_spec)), tmp_path / "a.ckpt")
        data = bytearray(path.read_bytes())
        data[-10] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(ChecksumError):
            load_checkpoint(path)

    def test_foreign_file(self, tmp_path):
        path = tmp_path / "x.ckpt"
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(ChecksumError):
            load_checkpoint(path)

    def test_future_version(self, tmp_path, small_unet_spec):
        record = make_record(build_generator(small_unet_spec), format_version=CHECKPOINT_FORMAT_VERSION + 1)
        path = save_checkpoint(record, tmp_path / "future.ckpt")
        assert path.read_bytes().startswith(MAGIC)
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(path)

    def test_older_version(self, tmp_path, small_unet_spec):
        record = make_record(build_generator(small_unet_spec), format_version=CHECKPOINT_FORMAT_VERSION - 1)
        path = save_checkpoint(record, tmp_path / "old.ckpt")
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(path)

    def test_missing_version_tag(self, tmp_path, small_unet_spec):
        record = make_record(build_generator(small_unet_spec))
        buffer = io.BytesIO()
        torch.save({"metadata": record.metadata(), "state_dict": record.parameters}, buffer)
        payload = buffer.getvalue()
        path = tmp_path / "untagged.ckpt"
        path.write_bytes(MAGIC + hashlib.sha256(payload).digest() + payload)
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "nothing.ckpt")

    def test_parameters_for_other_spec(self, tmp_path, small_unet_spec):
        other = build_generator(get_preset("U-Net_2_44", width=8))
        record = make_record(other).model_copy(update={"spec": small_unet_spec})
        with pytest.raises(CheckpointError):
            network_from_record(record)


class TestCheckpointNaming:
    def test_name(self):
        assert checkpoint_name("U-Net_2_44", "segmentation", "P50k", 15) == "U-Net_2_44_segmentation_P50k_e15.ckpt"

    def test_list_sorted(self, tmp_path, small_unet_spec):
        net = build_generator(small_unet_spec)
        for epoch in (10, 5):
            save_checkpoint(make_record(net, epoch), tmp_path / checkpoint_name("U-Net_2_44", "pretext", "all", epoch))
        (tmp_path / "notes.txt").write_text("x")
        names = [p.name for p in list_checkpoints(tmp_path)]
        assert names == ["U-Net_2_44_pretext_all_e10.ckpt", "U-Net_2_44_pretext_all_e5.ckpt"]

    def test_list_missing_dir(self, tmp_path):
        with pytest.raises(CheckpointError):
            list_checkpoints(tmp_path / "missing")
