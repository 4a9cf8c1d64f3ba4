from abc import ABC, abstractmethod

import torch
from torch import nn

from src.config.settings import HeadKind
from src.models.model_spec import ModelSpec
from src.utils import ModelSpecError


class Network(nn.Module, ABC):
    """스펙으로부터 생성된 네트워크의 공통 인터페이스."""

    head_name: str = "head"

    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec


class GeneratorNetwork(Network):
    """이미지 → 이미지 생성자. forward_features 뒤에 교체 가능한 head 가 붙는다."""

    head_kind: HeadKind = HeadKind.REGRESSION

    @property
    @abstractmethod
    def feature_channels(self) -> int:
        """head 로 들어가는 특징 채널 수"""
        pass

    @abstractmethod
    def forward_features(self, x: torch.Tensor) -> torch.Tensor:
        pass

    def check_input(self, x: torch.Tensor):
        multiple = self.spec.size_multiple
        height, width = x.shape[-2:]
        if height % multiple or width % multiple:
            raise ModelSpecError(
                f"입력 크기 {height}x{width} 는 2^blocks={multiple} 의 배수여야 합니다 ({self.spec.name})."
            )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        self.check_input(x)
        return self.head(self.forward_features(x))
