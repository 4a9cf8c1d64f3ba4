from .base import SampleSource
from .dataset_repository import (
    DirectoryDataset, SubsetDataset, ingest_dataset, write_layout, read_image, write_image
)
from .checkpoint_repository import save_checkpoint, load_checkpoint, list_checkpoints, checkpoint_name

__all__ = [
    "SampleSource",
    "DirectoryDataset",
    "SubsetDataset",
    "ingest_dataset",
    "write_layout",
    "read_image",
    "write_image",
    "save_checkpoint",
    "load_checkpoint",
    "list_checkpoints",
    "checkpoint_name"
]
