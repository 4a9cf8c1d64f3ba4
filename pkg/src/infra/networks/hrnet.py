"""
HRNet 생성자
- 고해상도 스트림을 끝까지 유지하면서 저해상도 스트림을 단계적으로 추가
- 각 단계 끝에서 모든 스트림 간 교환(fuse)
- 출력은 모든 스트림을 원 해상도로 올려 concat 후 1x1 으로 축소 (이미지 → 이미지)
"""
from typing import List

import torch
from torch import nn

from src.config.settings import HeadKind
from src.infra.networks.base import GeneratorNetwork
from src.infra.networks.heads import make_head
from src.infra.networks.layers import ConvNormAct, ResidualBlock
from src.models.model_spec import ModelSpec


class HRModule(nn.Module):
    def __init__(self, channels: List[int], num_blocks: int):
        super().__init__()
        self.num_branches = len(channels)

        self.branches = nn.ModuleList([
            nn.Sequential(*[ResidualBlock(c) for _ in range(num_blocks)])
            for c in channels
        ])

        self.fuse_layers = nn.ModuleList()
        for i in range(self.num_branches):
            fuse_layer = nn.ModuleList()
            for j in range(self.num_branches):
                if i == j:
                    fuse_layer.append(nn.Identity())
                elif j > i:
                    fuse_layer.append(nn.Sequential(
                        ConvNormAct(channels[j], channels[i], 1, act=False),
                        nn.Upsample(scale_factor=2 ** (j - i), mode="nearest")
                    ))
                else:
                    steps = []
                    for k in range(i - j):
                        last = k == i - j - 1
                        steps.append(ConvNormAct(channels[j], channels[i] if last else channels[j], 3,
                                                 stride=2, act=not last))
                    fuse_layer.append(nn.Sequential(*steps))
            self.fuse_layers.append(fuse_layer)

        self.act = nn.LeakyReLU(0.2)

    def forward(self, xs: List[torch.Tensor]) -> List[torch.Tensor]:
        xs = [branch(x) for branch, x in zip(self.branches, xs)]
        fused = []
        for i in range(self.num_branches):
            y = xs[0] if i == 0 else self.fuse_layers[i][0](xs[0])
            for j in range(1, self.num_branches):
                y = y + (xs[j] if i == j else self.fuse_layers[i][j](xs[j]))
            fused.append(self.act(y))
        return fused


class HRNetGenerator(GeneratorNetwork):
    """축소 폭 HRNet. spec.blocks = 저해상도 스트림 수, spec.width = 기본 폭."""

    def __init__(self, spec: ModelSpec, modules_per_stage: int = 1, blocks_per_branch: int = 2):
        super().__init__(spec)
        width = spec.width
        branches = (spec.blocks or 3) + 1
        self.channels = [width * 2 ** i for i in range(branches)]

        self.hr_stem = nn.Sequential(
            ConvNormAct(spec.in_channels, width, 3),
            ConvNormAct(width, width, 3)
        )
        self.hr_stage0 = nn.Sequential(*[ResidualBlock(width) for _ in range(blocks_per_branch)])

        self.transitions = nn.ModuleList()
        self.hr_stages = nn.ModuleList()
        for s in range(1, branches):
            self.transitions.append(ConvNormAct(self.channels[s - 1], self.channels[s], 3, stride=2))
            self.hr_stages.append(nn.ModuleList([
                HRModule(self.channels[:s + 1], blocks_per_branch) for _ in range(modules_per_stage)
            ]))

        self.upsamplers = nn.ModuleList([
            nn.Identity() if i == 0 else nn.Upsample(scale_factor=2 ** i, mode="nearest")
            for i in range(branches)
        ])
        self.hr_fuse = ConvNormAct(sum(self.channels), width, 1)
        self.head = make_head(HeadKind.REGRESSION, width, spec.out_channels)

    @property
    def feature_channels(self) -> int:
        return self.spec.width

    def forward_features(self, x: torch.Tensor) -> torch.Tensor:
        xs = [self.hr_stage0(self.hr_stem(x))]
        for transition, modules in zip(self.transitions, self.hr_stages):
            xs = xs + [transition(xs[-1])]
            for module in modules:
                xs = module(xs)
        ups = [up(x_i) for up, x_i in zip(self.upsamplers, xs)]
        return self.hr_fuse(torch.cat(ups, dim=1))
