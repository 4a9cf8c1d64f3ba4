import torch
from torch import nn

from src.infra.networks.base import Network
from src.models.model_spec import LayerKind, ModelSpec
from src.utils import ModelSpecError


class PatchDiscriminator(Network):
    """조건부 PatchGAN 판별자: (x, y) 를 채널 방향으로 이어 붙여 패치 점수 그리드를 출력"""

    head_name = "score"

    def __init__(self, spec: ModelSpec):
        super().__init__(spec)
        convs = [layer for layer in spec.stage_layers if layer.kind is LayerKind.CONV]
        if len(convs) < 2:
            raise ModelSpecError(f"{spec.name}: 판별자는 최소 2개의 conv 레이어가 필요합니다.")

        layers = []
        channels = spec.in_channels
        for index, layer in enumerate(convs[:-1]):
            layers.append(nn.Conv2d(channels, layer.channels, layer.kernel, stride=layer.stride, padding=1))
            # 첫 레이어는 정규화하지 않음 (pix2pix 관례)
            if index > 0:
                layers.append(nn.InstanceNorm2d(layer.channels, affine=True))
            layers.append(nn.LeakyReLU(0.2))
            channels = layer.channels
        self.body = nn.Sequential(*layers)

        last = convs[-1]
        self.score = nn.Conv2d(channels, spec.out_channels, last.kernel, stride=last.stride, padding=1)

    def forward(self, condition: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
        paired = condition.shape[1] + image.shape[1]
        if paired != self.spec.in_channels:
            raise ModelSpecError(
                f"판별자 채널 불일치: 입력 {condition.shape[1]}+{image.shape[1]} != {self.spec.in_channels}"
            )
        return self.score(self.body(torch.cat([condition, image], dim=1)))
