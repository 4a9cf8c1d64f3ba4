from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.config.settings import Family


class LayerKind(str, Enum):
    CONV = "conv"
    DOWN = "down"
    UP = "up"
    RESIDUAL_BLOCK = "residual_block"
    NORM = "norm"
    ACTIVATION = "activation"
    SKIP_MERGE = "skip_merge"


class LayerSpec(BaseModel):
    """단일 레이어 선언 (수용 영역 계산과 네트워크 생성의 공통 단위)"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: LayerKind = Field(description="레이어 종류")
    kernel: int = Field(default=1, ge=1, description="커널 크기")
    stride: int = Field(default=1, ge=1, description="stride (up 레이어는 확대 배율)")
    dilation: int = Field(default=1, ge=1, description="dilation")
    channels: int = Field(default=0, ge=0, description="출력 채널 수 (0 이면 입력 채널 유지)")


class ModelSpec(BaseModel):
    """생성자/판별자 아키텍처의 선언적 기술"""
    model_config = ConfigDict(extra="forbid")

    family: Family = Field(description="네트워크 계열")
    name: str = Field(description="스펙 이름 (예: U-Net_4_424)")
    blocks: Optional[int] = Field(default=None, ge=1, description="다운샘플 단계 수 (U-Net 잔차 블록 수)")
    stage_layers: List[LayerSpec] = Field(default_factory=list, description="가장 깊은 경로를 따라 정렬된 레이어 목록")
    target_rf: Optional[int] = Field(default=None, ge=1, description="목표 수용 영역 (픽셀)")
    in_channels: int = Field(default=1, ge=1, description="입력 채널 수")
    out_channels: int = Field(default=1, ge=1, description="출력 채널 수")
    width: int = Field(default=16, ge=1, description="기본 채널 폭 (HRNet 폭 배수 기준)")

    @property
    def size_multiple(self) -> int:
        """입력 한 변이 나누어떨어져야 하는 값"""
        return 2 ** (self.blocks or 0)
