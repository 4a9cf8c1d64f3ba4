"""
체크포인트 저장소

파일 구조: MAGIC(8) | sha256(payload)(32) | payload
payload 는 torch.save({"format_version", "metadata", "state_dict"}) 결과이다.
쓰기는 임시 파일 + os.replace 로 원자적으로 수행한다.
"""
import hashlib
import io
import os
import tempfile
from pathlib import Path
from typing import List, Union

import torch

from src.models.records import CHECKPOINT_FORMAT_VERSION, CheckpointRecord
from src.utils import CheckpointError, CheckpointVersionError, ChecksumError
from src.utils.logger import get_logger

logger = get_logger(__name__)

MAGIC = b"EMSSCKPT"
DIGEST_SIZE = hashlib.sha256().digest_size
CHECKPOINT_SUFFIX = ".ckpt"


def save_checkpoint(record: CheckpointRecord, path: Union[str, Path]) -> Path:
    """CheckpointRecord 를 원자적으로 저장"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    buffer = io.BytesIO()
    torch.save({
        "format_version": record.format_version,
        "metadata": record.metadata(),
        "state_dict": {name: tensor.detach().cpu() for name, tensor in record.parameters.items()},
    }, buffer)
    payload = buffer.getvalue()

    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(MAGIC)
            f.write(hashlib.sha256(payload).digest())
            f.write(payload)
        os.replace(tmp_name, path)
    except OSError as e:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise CheckpointError(f"체크포인트를 저장할 수 없습니다: {path}") from e

    logger.debug(f"체크포인트 저장: {path} (epoch={record.epoch}, metric={record.best_val_metric:.6f})")
    return path


def load_checkpoint(path: Union[str, Path]) -> CheckpointRecord:
    """체크섬/버전을 검증하고 CheckpointRecord 로 복원"""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"체크포인트를 읽을 수 없습니다: {path}") from e

    header = len(MAGIC) + DIGEST_SIZE
    if len(raw) < header or raw[:len(MAGIC)] != MAGIC:
        raise ChecksumError(f"체크포인트 헤더가 손상되었습니다: {path}")
    digest, payload = raw[len(MAGIC):header], raw[header:]
    if hashlib.sha256(payload).digest() != digest:
        raise ChecksumError(f"체크포인트 체크섬이 일치하지 않습니다 (잘리거나 손상된 파일): {path}")

    try:
        content = torch.load(io.BytesIO(payload), map_location="cpu", weights_only=True)
    except Exception as e:
        raise ChecksumError(f"체크포인트 payload 를 해석할 수 없습니다: {path}") from e

    version = content.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointVersionError(
            f"지원하지 않는 체크포인트 포맷 버전 {version} (지원: {CHECKPOINT_FORMAT_VERSION}): {path}"
        )
    metadata = dict(content["metadata"], format_version=version)
    try:
        return CheckpointRecord(parameters=content["state_dict"], **metadata)
    except ValueError as e:
        raise CheckpointError(f"체크포인트 메타데이터가 올바르지 않습니다: {path}") from e


def list_checkpoints(directory: Union[str, Path]) -> List[Path]:
    """디렉토리 안의 체크포인트 파일 (이름순)"""
    directory = Path(directory)
    if not directory.is_dir():
        raise CheckpointError(f"체크포인트 디렉토리가 없습니다: {directory}")
    return sorted(p for p in directory.iterdir() if p.suffix == CHECKPOINT_SUFFIX)


def checkpoint_name(spec_name: str, task: str, tag: str, epoch: int) -> str:
    """{spec}_{task}_{tag}_e{epoch}.ckpt"""
    return f"{spec_name}_{task}_{tag}_e{epoch}{CHECKPOINT_SUFFIX}"
