import os
from enum import Enum
from pydantic_settings import BaseSettings, SettingsConfigDict


# 네트워크 계열 Enum
class Family(str, Enum):
    UNET = "unet"
    HRNET = "hrnet"
    PATCHGAN_DISC = "patchgan_disc"

# 학습 태스크 Enum
class Task(str, Enum):
    PRETEXT = "pretext"
    SEGMENTATION = "segmentation"
    DENOISE = "denoise"
    NOISE_BG_REMOVAL = "noise_bg_removal"
    SUPERRES = "superres"

    @property
    def is_regression(self) -> bool:
        return self in (Task.PRETEXT, Task.DENOISE, Task.NOISE_BG_REMOVAL, Task.SUPERRES)

# 헤드 종류 Enum
class HeadKind(str, Enum):
    SEGMENTATION = "segmentation"
    REGRESSION = "regression"

# 가중치 초기화 방식 Enum
class InitMode(str, Enum):
    RANDOM = "random"
    PRETRAINED = "pretrained"

# 평가 지표 Enum
class MetricKind(str, Enum):
    DICE = "dice"
    L1 = "l1"

    @property
    def higher_is_better(self) -> bool:
        return self is MetricKind.DICE

# 실행 종류 Enum
class RunKind(str, Enum):
    PRETRAIN = "pretrain"
    FINETUNE = "finetune"
    EVALUATE = "evaluate"
    SYNTH_DATA = "synth-data"
    RF_REPORT = "rf-report"


def head_kind_for(task: Task) -> HeadKind:
    """태스크에 맞는 헤드 종류 반환"""
    return HeadKind.SEGMENTATION if task is Task.SEGMENTATION else HeadKind.REGRESSION


def metric_kind_for(task: Task) -> MetricKind:
    """태스크에 맞는 검증 지표 반환"""
    return MetricKind.DICE if task is Task.SEGMENTATION else MetricKind.L1


# 런타임 설정
class RuntimeConfig(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="EMSS_")

    deterministic: bool = False
    device: str = "cpu"
    num_workers: int = 0
    # 수용 영역 측정용 dtype (float64 권장)
    probe_dtype: str = "float64"

# 로깅 설정
class LogConfig(BaseSettings):
    log_level: str = os.getenv("LOG_LEVEL", "INFO")
    log_file: str = os.getenv("LOG_FILE", "")


# 인스턴스 생성 (통합 진입점)
runtime_config = RuntimeConfig()
log_config = LogConfig()
