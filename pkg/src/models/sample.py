from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from src.config.settings import Task


@dataclass
class SamplePair:
    """학습 예제 하나: 입력 그리드 + 타깃 (이미지 또는 이진 마스크) + 태스크 태그.

    그리드는 (C, H, W) float32 배열이다.
    """
    input: np.ndarray
    target: np.ndarray
    task: Task
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.input.shape[-2:] != self.target.shape[-2:]:
            raise ValueError(f"입력과 타깃의 공간 크기가 다릅니다: {self.input.shape} vs {self.target.shape}")
        if self.task is Task.SEGMENTATION and not np.isin(self.target, (0, 1)).all():
            raise ValueError("마스크 값은 0 또는 1 이어야 합니다.")
