"""
학습 루프 공통 도구
- 결정론 모드/시드 설정
- 시드 고정 DataLoader
- NaN/Inf 발산 감지
- 체크포인트 선택 정책 (best_so_far / window_best)
"""
import copy
import math
import os
import random
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
import torch
from torch import nn
from torch.utils.data import DataLoader, Dataset

from src.config.settings import runtime_config
from src.models.training import CheckpointPolicy
from src.utils import TrainingDivergedError
from src.utils.logger import get_logger

logger = get_logger(__name__)


def configure_determinism(seed: int, deterministic: Optional[bool] = None):
    """전역 RNG 시드 설정. deterministic 이면 결정론적 알고리즘만 사용"""
    deterministic = runtime_config.deterministic if deterministic is None else deterministic
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if deterministic:
        os.environ.setdefault("CUBLAS_WORKSPACE_CONFIG", ":4096:8")
        torch.use_deterministic_algorithms(True)
        torch.backends.cudnn.benchmark = False
        logger.info("결정론 모드 활성화")


def make_loader(dataset: Dataset, batch_size: int, seed: int, shuffle: bool = True) -> DataLoader:
    """seed 로 셔플 순서가 고정되는 DataLoader"""
    generator = torch.Generator()
    generator.manual_seed(seed)
    return DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=shuffle,
        generator=generator,
        num_workers=runtime_config.num_workers,
        drop_last=False,
    )


def check_finite(loss: torch.Tensor, step: str):
    value = float(loss.detach())
    if not math.isfinite(value):
        raise TrainingDivergedError(f"{step} 에서 손실이 발산했습니다 (loss={value}).")


def snapshot(net: nn.Module) -> Dict[str, torch.Tensor]:
    """파라미터/버퍼의 CPU 사본"""
    return {name: tensor.detach().cpu().clone() for name, tensor in net.state_dict().items()}


@dataclass
class Selection:
    value: float
    epoch: int
    state: Dict[str, torch.Tensor]


class CheckpointSelector:
    """에폭별 검증 지표를 받아 체크포인트 주기마다 저장할 파라미터를 고른다.

    best_so_far: 지금까지 가장 좋은 파라미터, window_best: 직전 주기 안에서 가장 좋은 파라미터.
    동률이면 먼저 얻은 쪽을 유지한다.
    """

    def __init__(self, policy: CheckpointPolicy, interval: int, higher_is_better: bool):
        self.policy = policy
        self.interval = interval
        self.higher_is_better = higher_is_better
        self.best: Optional[Selection] = None

    def _better(self, value: float) -> bool:
        if self.best is None:
            return True
        return value > self.best.value if self.higher_is_better else value < self.best.value

    def observe(self, epoch: int, value: float, net: nn.Module) -> Optional[Selection]:
        if self._better(value):
            self.best = Selection(value, epoch, snapshot(net))
        if epoch % self.interval:
            return None
        selection = copy.copy(self.best)
        if self.policy is CheckpointPolicy.WINDOW_BEST:
            self.best = None
        return selection
