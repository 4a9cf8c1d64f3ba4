from torch import nn

from src.config.settings import HeadKind


class RegressionHead(nn.Module):
    """1x1 projection, 포화 비선형성 없음 (표준화 강도 출력)"""

    def __init__(self, in_channels: int, out_channels: int):
        super().__init__()
        self.proj = nn.Conv2d(in_channels, out_channels, 1)

    def forward(self, x):
        return self.proj(x)


class SegmentationHead(nn.Module):
    """1채널 확률 출력 head"""

    def __init__(self, in_channels: int):
        super().__init__()
        self.logits = nn.Conv2d(in_channels, 1, 1)
        self.activation = nn.Sigmoid()

    def forward(self, x):
        return self.activation(self.logits(x))


def make_head(kind: HeadKind, in_channels: int, out_channels: int) -> nn.Module:
    if kind is HeadKind.SEGMENTATION:
        return SegmentationHead(in_channels)
    return RegressionHead(in_channels, out_channels)
