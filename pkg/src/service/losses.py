"""
손실 함수
- LSGAN 판별자/생성자 손실 (0.5 계수)
- L1 재구성 손실과 생성자 목적함수 g_adv + λ·L1
- 세그멘테이션 BCE, 회귀 L1+L2
"""
import torch

from src.utils import LossInputError

BCE_EPS = 1e-7


def _check_nonempty(*tensors: torch.Tensor):
    for tensor in tensors:
        if tensor.numel() == 0:
            raise LossInputError("빈 배치로 손실을 계산할 수 없습니다.")


def _check_same_shape(pred: torch.Tensor, target: torch.Tensor):
    if pred.shape != target.shape:
        raise LossInputError(f"shape 불일치: {tuple(pred.shape)} vs {tuple(target.shape)}")
    _check_nonempty(pred)


def lsgan_d_loss(real_scores: torch.Tensor, fake_scores: torch.Tensor) -> torch.Tensor:
    """0.5·mean((real−1)²) + 0.5·mean(fake²)"""
    _check_nonempty(real_scores, fake_scores)
    return 0.5 * ((real_scores - 1) ** 2).mean() + 0.5 * (fake_scores ** 2).mean()


def lsgan_g_loss(fake_scores: torch.Tensor) -> torch.Tensor:
    """0.5·mean((fake−1)²)"""
    _check_nonempty(fake_scores)
    return 0.5 * ((fake_scores - 1) ** 2).mean()


def l1_recon_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    _check_same_shape(pred, target)
    return (pred - target).abs().mean()


def generator_objective(g_adv: torch.Tensor, l1: torch.Tensor, lambda_l1: float) -> torch.Tensor:
    if lambda_l1 < 0:
        raise LossInputError(f"λ 는 0 이상이어야 합니다: {lambda_l1}")
    return g_adv + lambda_l1 * l1


def bce_loss(pred_probs: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """−mean(m·log p + (1−m)·log(1−p)), p 는 [ε, 1−ε] 로 clamp"""
    _check_same_shape(pred_probs, mask)
    p = pred_probs.clamp(BCE_EPS, 1 - BCE_EPS)
    return -(mask * torch.log(p) + (1 - mask) * torch.log(1 - p)).mean()


def regression_loss(pred: torch.Tensor, target: torch.Tensor, w1: float = 1.0, w2: float = 1.0) -> torch.Tensor:
    """w1·mean|Δ| + w2·mean(Δ²)"""
    _check_same_shape(pred, target)
    if w1 < 0 or w2 < 0:
        raise LossInputError(f"가중치는 0 이상이어야 합니다: w1={w1}, w2={w2}")
    delta = pred - target
    return w1 * delta.abs().mean() + w2 * (delta ** 2).mean()
