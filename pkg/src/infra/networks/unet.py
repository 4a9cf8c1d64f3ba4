from typing import List

import torch
from torch import nn

from src.config.settings import HeadKind
from src.infra.networks.base import GeneratorNetwork
from src.infra.networks.heads import make_head
from src.infra.networks.layers import ConvNormAct, ResidualBlock
from src.models.model_spec import LayerKind, LayerSpec, ModelSpec
from src.utils import ModelSpecError


class EncoderStage(nn.Module):
    """잔차 블록 + 다운샘플 (skip 은 다운샘플 직전 특징)"""

    def __init__(self, channels: int, block: LayerSpec, down: LayerSpec):
        super().__init__()
        self.block = ResidualBlock(channels, block.kernel, block.dilation)
        self.down = ConvNormAct(channels, down.channels or channels, down.kernel, stride=down.stride)

    def forward(self, x):
        skip = self.block(x)
        return self.down(skip), skip


class DecoderStage(nn.Module):
    """업샘플 + skip 결합 + 정제 conv"""

    def __init__(self, in_channels: int, skip_channels: int, up: LayerSpec, merge: LayerSpec, refine: LayerSpec):
        super().__init__()
        merge_channels = merge.channels or skip_channels
        self.up = nn.Upsample(scale_factor=up.stride, mode="nearest")
        self.merge = ConvNormAct(in_channels + skip_channels, merge_channels, merge.kernel)
        self.refine = ConvNormAct(merge_channels, refine.channels or merge_channels, refine.kernel, dilation=refine.dilation)

    @property
    def out_channels(self) -> int:
        return self.refine[0].out_channels

    def forward(self, x, skip):
        x = self.up(x)
        return self.refine(self.merge(torch.cat([x, skip], dim=1)))


def split_unet_layers(spec: ModelSpec):
    """stage_layers 를 (stem, [(block, down)], bottleneck, [(up, merge, refine)]) 로 분해"""
    layers = [layer for layer in spec.stage_layers if layer.kind not in (LayerKind.NORM, LayerKind.ACTIVATION)]
    if not layers or layers[0].kind is not LayerKind.CONV:
        raise ModelSpecError(f"{spec.name}: 첫 레이어는 stem conv 여야 합니다.")
    stem, rest = layers[0], layers[1:]

    encoder = []
    while len(rest) >= 2 and rest[0].kind is LayerKind.RESIDUAL_BLOCK and rest[1].kind is LayerKind.DOWN:
        encoder.append((rest[0], rest[1]))
        rest = rest[2:]

    if not rest or rest[0].kind is not LayerKind.RESIDUAL_BLOCK:
        raise ModelSpecError(f"{spec.name}: 인코더 뒤에 bottleneck residual_block 이 필요합니다.")
    bottleneck, rest = rest[0], rest[1:]

    decoder = []
    while len(rest) >= 3:
        up, merge, refine = rest[:3]
        if (up.kind, merge.kind, refine.kind) != (LayerKind.UP, LayerKind.SKIP_MERGE, LayerKind.CONV):
            break
        decoder.append((up, merge, refine))
        rest = rest[3:]
    if rest:
        raise ModelSpecError(f"{spec.name}: 해석할 수 없는 디코더 레이어: {[layer.kind.value for layer in rest]}")
    if len(encoder) != len(decoder):
        raise ModelSpecError(f"{spec.name}: 인코더({len(encoder)})와 디코더({len(decoder)}) 단계 수가 다릅니다.")
    return stem, encoder, bottleneck, decoder


class UNetGenerator(GeneratorNetwork):
    """U-Net_B_RF 생성자. 레이어 구성은 전적으로 spec.stage_layers 에서 읽는다."""

    def __init__(self, spec: ModelSpec):
        super().__init__(spec)
        stem, encoder, bottleneck, decoder = split_unet_layers(spec)

        channels = stem.channels or spec.width
        self.stem = ConvNormAct(spec.in_channels, channels, stem.kernel, dilation=stem.dilation)

        skip_channels: List[int] = []
        self.encoder = nn.ModuleList()
        for block, down in encoder:
            self.encoder.append(EncoderStage(channels, block, down))
            skip_channels.append(channels)
            channels = down.channels or channels

        self.bottleneck = ResidualBlock(channels, bottleneck.kernel, bottleneck.dilation)

        self.decoder = nn.ModuleList()
        for (up, merge, refine), skip in zip(decoder, reversed(skip_channels)):
            stage = DecoderStage(channels, skip, up, merge, refine)
            self.decoder.append(stage)
            channels = stage.out_channels

        self._feature_channels = channels
        self.head = make_head(HeadKind.REGRESSION, channels, spec.out_channels)

    @property
    def feature_channels(self) -> int:
        return self._feature_channels

    def forward_features(self, x: torch.Tensor) -> torch.Tensor:
        x = self.stem(x)
        skips = []
        for stage in self.encoder:
            x, skip = stage(x)
            skips.append(skip)
        x = self.bottleneck(x)
        for stage, skip in zip(self.decoder, reversed(skips)):
            x = stage(x, skip)
        return x
