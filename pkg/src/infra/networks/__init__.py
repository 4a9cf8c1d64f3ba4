from .base import Network, GeneratorNetwork
from .unet import UNetGenerator
from .hrnet import HRNetGenerator
from .discriminator import PatchDiscriminator
from .heads import RegressionHead, SegmentationHead, make_head

__all__ = [
    "Network",
    "GeneratorNetwork",
    "UNetGenerator",
    "HRNetGenerator",
    "PatchDiscriminator",
    "RegressionHead",
    "SegmentationHead",
    "make_head"
]
