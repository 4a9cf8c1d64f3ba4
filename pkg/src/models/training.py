from enum import Enum
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _check_range(v: Tuple[float, float]) -> Tuple[float, float]:
    lo, hi = v
    if not (0 <= lo <= hi):
        raise ValueError(f"범위는 0 <= lo <= hi 를 만족해야 합니다: {v}")
    return v


class CheckpointPolicy(str, Enum):
    BEST_SO_FAR = "best_so_far"
    WINDOW_BEST = "window_best"


class TrainHyper(BaseModel):
    """옵티마이저/학습 루프 하이퍼파라미터"""
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=60, gt=0, description="에폭 수")
    batch_size: int = Field(default=128, gt=0, description="배치 크기")
    learning_rate: float = Field(default=2e-4, gt=0, description="학습률")
    lambda_l1: float = Field(default=100.0, ge=0, description="L1 항 가중치 λ")
    optimizer: str = Field(default="adam", pattern="^adam$", description="옵티마이저 (adam 만 지원)")
    adam_betas: Tuple[float, float] = Field(default=(0.5, 0.999), description="Adam beta 값")
    seed: int = Field(default=0, description="난수 시드")
    checkpoint_interval_epochs: int = Field(default=5, gt=0, description="체크포인트 저장 주기 (에폭)")
    checkpoint_policy: CheckpointPolicy = Field(default=CheckpointPolicy.BEST_SO_FAR, description="체크포인트 선택 정책")
    subset_size: Optional[int] = Field(default=None, gt=0, description="사전학습 부분집합 크기 (50K/100K/200K 프로토콜)")
    l1_weight: float = Field(default=1.0, ge=0, description="회귀 손실의 L1 가중치 w1")
    l2_weight: float = Field(default=1.0, ge=0, description="회귀 손실의 L2 가중치 w2")
    save_samples: bool = Field(default=False, description="체크포인트마다 생성 결과 이미지 저장")

    @property
    def subset_label(self) -> str:
        """체크포인트 이름/출처 태그에 쓰이는 부분집합 라벨 (예: 50k)"""
        if self.subset_size is None:
            return "all"
        if self.subset_size % 1000 == 0:
            return f"{self.subset_size // 1000}k"
        return str(self.subset_size)


class CorruptionPolicy(BaseModel):
    """사전학습 입력 손상 정책 (노이즈 z 는 입력 손상으로 구현)"""
    model_config = ConfigDict(extra="forbid")

    gaussian_noise_sigma_range: Tuple[float, float] = Field(default=(0.0, 0.5), description="가우시안 노이즈 σ 범위 (표준화 단위)")
    blur_sigma_range: Tuple[float, float] = Field(default=(0.0, 2.0), description="블러 σ 범위 (픽셀)")
    flip: bool = Field(default=True, description="무작위 좌우/상하 반전")
    rotate: bool = Field(default=True, description="무작위 90도 회전")

    @field_validator("gaussian_noise_sigma_range", "blur_sigma_range")
    @classmethod
    def validate_ranges(cls, v):
        return _check_range(v)

    @classmethod
    def identity(cls) -> "CorruptionPolicy":
        """손상이 전혀 없는 정책"""
        return cls(gaussian_noise_sigma_range=(0.0, 0.0), blur_sigma_range=(0.0, 0.0), flip=False, rotate=False)


class AugmentPolicy(BaseModel):
    """지도학습 데이터 증강 정책"""
    model_config = ConfigDict(extra="forbid")

    noise: bool = Field(default=True, description="입력에 가우시안 노이즈 추가")
    noise_sigma_range: Tuple[float, float] = Field(default=(0.0, 0.1), description="노이즈 σ 범위 (표준화 단위)")
    flip: bool = Field(default=True, description="무작위 반전")
    rotations: List[int] = Field(default_factory=lambda: [0, 90, 180, 270], description="허용 회전 각도 (90의 배수)")
    resize_scale_range: Tuple[float, float] = Field(default=(1.0, 1.0), description="무작위 리사이즈 배율 범위")
    crop_size: Optional[int] = Field(default=None, gt=0, description="무작위 크롭 크기 (None 이면 크롭 안함)")

    @field_validator("noise_sigma_range")
    @classmethod
    def validate_ranges(cls, v):
        return _check_range(v)

    @field_validator("rotations")
    @classmethod
    def validate_rotations(cls, v):
        if any(angle % 90 != 0 for angle in v):
            raise ValueError(f"회전 각도는 90의 배수여야 합니다: {v}")
        return sorted(set(angle % 360 for angle in v)) or [0]

    @field_validator("resize_scale_range")
    @classmethod
    def validate_scale(cls, v):
        lo, hi = v
        if not (0 < lo <= hi):
            raise ValueError(f"리사이즈 배율 범위는 0 < lo <= hi 여야 합니다: {v}")
        return v

    @classmethod
    def none(cls) -> "AugmentPolicy":
        """증강 없음 (평가용)"""
        return cls(noise=False, flip=False, rotations=[0])


class SplitSpec(BaseModel):
    """train/val/test 분할 설정 (개수 또는 비율)"""
    model_config = ConfigDict(extra="forbid")

    unit: Literal["auto", "count", "fraction"] = Field(default="auto", description="값 해석 방식 (auto 는 소수가 있으면 비율)")
    train: float = Field(ge=0, description="학습 개수 또는 비율")
    val: float = Field(ge=0, description="검증 개수 또는 비율")
    test: float = Field(ge=0, description="테스트 개수 또는 비율")
    seed: int = Field(default=0, description="셔플 시드")

    @property
    def is_fraction(self) -> bool:
        if self.unit != "auto":
            return self.unit == "fraction"
        return any(not float(v).is_integer() for v in (self.train, self.val, self.test))

    @model_validator(mode="after")
    def validate_kind(self):
        if not self.is_fraction:
            for v in (self.train, self.val, self.test):
                if not float(v).is_integer():
                    raise ValueError("개수와 비율을 혼용할 수 없습니다.")
        elif self.train + self.val + self.test > 1.0 + 1e-9:
            raise ValueError("비율의 합은 1 이하여야 합니다.")
        return self


class SynthParams(BaseModel):
    """EM 유사 합성 코퍼스 파라미터"""
    model_config = ConfigDict(extra="forbid")

    count: int = Field(default=64, gt=0, description="샘플 수")
    image_size: int = Field(default=64, gt=0, description="이미지 한 변 (픽셀)")
    lattice_spacing_range: Tuple[float, float] = Field(default=(4.0, 7.0), description="격자 간격 범위 (픽셀)")
    atom_sigma: float = Field(default=1.0, gt=0, description="원자 블롭 σ (픽셀)")
    sharpen_factor: float = Field(default=0.5, gt=0, le=1, description="초해상도 타깃의 σ 배율")
    particle_count_range: Tuple[int, int] = Field(default=(1, 3), description="입자 수 범위")
    particle_radius_range: Tuple[float, float] = Field(default=(8.0, 16.0), description="입자 반지름 범위 (픽셀)")
    amorphous_amplitude: float = Field(default=0.1, ge=0, description="비정질 기지 텍스처 진폭")
    background_amplitude: float = Field(default=0.5, ge=0, description="저주파 배경 진폭")
    noise_level: float = Field(default=0.2, ge=0, description="노이즈 강도 (0 이면 노이즈 없음)")
    poisson_dose: float = Field(default=200.0, gt=0, description="noise_level=1 일 때의 전자 선량")
    scan_jitter_px: float = Field(default=1.0, ge=0, description="noise_level=1 일 때의 스캔 라인 흔들림 (픽셀)")

    @field_validator("lattice_spacing_range", "particle_radius_range")
    @classmethod
    def validate_ranges(cls, v):
        return _check_range(v)

    @field_validator("particle_count_range")
    @classmethod
    def validate_count_range(cls, v):
        lo, hi = v
        if not (0 <= lo <= hi):
            raise ValueError(f"입자 수 범위가 잘못되었습니다: {v}")
        return v
