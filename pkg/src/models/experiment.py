from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config.settings import InitMode, RunKind, Task
from src.models.model_spec import ModelSpec
from src.models.training import AugmentPolicy, CorruptionPolicy, SplitSpec, SynthParams, TrainHyper

# 실행 종류/태스크별 기본값
PRETRAIN_DEFAULTS = {"epochs": 60, "batch_size": 128, "learning_rate": 2e-4, "lambda_l1": 100.0}
SEGMENTATION_DEFAULTS = {"epochs": 60, "batch_size": 16, "learning_rate": 2e-4}
REGRESSION_DEFAULTS = {"epochs": 60, "batch_size": 64, "learning_rate": 2e-4}
SEGMENTATION_CROP = 448
REGRESSION_CROP = 256


class ModelSection(BaseModel):
    """프리셋 이름 또는 인라인 ModelSpec"""
    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = Field(default=None, description="프리셋 이름 (예: U-Net_2_44, HRNet)")
    spec: Optional[ModelSpec] = Field(default=None, description="인라인 모델 스펙")
    width: int = Field(default=16, gt=0, description="프리셋 기본 채널 폭")
    in_channels: int = Field(default=1, gt=0, description="이미지 채널 수")

    @model_validator(mode="after")
    def validate_choice(self):
        if (self.preset is None) == (self.spec is None):
            raise ValueError("preset 과 spec 중 정확히 하나를 지정해야 합니다.")
        return self


class DiscriminatorSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    width: int = Field(default=16, gt=0, description="PatchGAN 기본 채널 폭")


class DataSection(BaseModel):
    """데이터 원천: 레이아웃 디렉토리 또는 합성 코퍼스"""
    model_config = ConfigDict(extra="forbid")

    root: Optional[Path] = Field(default=None, description="레이아웃 디렉토리")
    layout_manifest: Optional[Path] = Field(default=None, description="layout.yaml 경로 (기본: <root>/layout.yaml)")
    synthetic: Optional[SynthParams] = Field(default=None, description="합성 코퍼스 파라미터")
    synthetic_seed: int = Field(default=0, description="합성 코퍼스 시드")
    split: SplitSpec = Field(default_factory=lambda: SplitSpec(train=0.8, val=0.1, test=0.1),
                             description="레이아웃에 val 분할이 없을 때 쓰는 분할")
    patch_size: Optional[int] = Field(default=None, gt=0, description="분할 후 샘플을 겹치지 않는 타일로 나눌 크기 (None 이면 원본 그대로)")
    reject_background: bool = Field(default=True, description="segmentation 타일 중 배경만 있는 것 제외")
    bg_threshold: float = Field(default=0.0, ge=0.0, lt=1.0, description="배경으로 보는 전경 비율 상한")

    @model_validator(mode="after")
    def validate_source(self):
        if self.root is None and self.synthetic is None:
            raise ValueError("root 또는 synthetic 중 하나를 지정해야 합니다.")
        if self.root is not None and self.synthetic is not None:
            raise ValueError("root 와 synthetic 은 함께 쓸 수 없습니다.")
        return self


class InitSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: InitMode = Field(default=InitMode.RANDOM, description="가중치 초기화 방식")
    checkpoint: Optional[Path] = Field(default=None, description="사전학습 체크포인트 경로")

    @model_validator(mode="after")
    def validate_checkpoint(self):
        if self.mode is InitMode.PRETRAINED and self.checkpoint is None:
            raise ValueError("pretrained 초기화에는 checkpoint 가 필요합니다.")
        return self


class EvaluateSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    checkpoint_dir: Path = Field(description="평가할 체크포인트 디렉토리")
    formats: List[Literal["csv", "markdown"]] = Field(default_factory=lambda: ["csv", "markdown"], description="표 형식")
    batch_size: int = Field(default=8, gt=0, description="평가 배치 크기")
    plot: bool = Field(default=True, description="fine-tune 검증 곡선 플롯 (val_*.csv 가 있을 때)")


class SynthOutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tasks: List[Task] = Field(default_factory=lambda: list(Task), description="레이아웃으로 기록할 태스크")


class ExperimentConfig(BaseModel):
    """실험 설정 (YAML). 모든 단계에서 알 수 없는 키는 거부한다."""
    model_config = ConfigDict(extra="forbid")

    kind: RunKind = Field(description="실행 종류")
    output_dir: Path = Field(default=Path("runs/default"), description="산출물 디렉토리")
    seed: int = Field(default=0, description="실험 시드 (hyper.seed 기본값)")
    task: Optional[Task] = Field(default=None, description="미세조정/평가 태스크")
    model: Optional[ModelSection] = Field(default=None, description="생성자")
    discriminator: DiscriminatorSection = Field(default_factory=DiscriminatorSection)
    data: Optional[DataSection] = Field(default=None, description="데이터")
    hyper: TrainHyper = Field(default_factory=TrainHyper)
    corruption: CorruptionPolicy = Field(default_factory=CorruptionPolicy)
    augment: AugmentPolicy = Field(default_factory=AugmentPolicy)
    init: InitSection = Field(default_factory=InitSection)
    evaluate: Optional[EvaluateSection] = Field(default=None)
    synth: SynthOutputSection = Field(default_factory=SynthOutputSection)
    rf_spec: Optional[str] = Field(default=None, description="rf-report 대상 프리셋 (없으면 전체)")

    @model_validator(mode="before")
    @classmethod
    def fill_kind_defaults(cls, values: Any) -> Any:
        """실행 종류/태스크에 따른 hyper 와 크롭 기본값 채우기 (명시 값이 우선)"""
        if not isinstance(values, dict):
            return values
        values = dict(values)
        kind, task = values.get("kind"), values.get("task")
        hyper = dict(values.get("hyper") or {})
        hyper.setdefault("seed", values.get("seed", 0))

        if kind == RunKind.PRETRAIN.value:
            defaults = PRETRAIN_DEFAULTS
        elif kind in (RunKind.FINETUNE.value, RunKind.EVALUATE.value) and task is not None:
            is_segmentation = task == Task.SEGMENTATION.value
            defaults = SEGMENTATION_DEFAULTS if is_segmentation else REGRESSION_DEFAULTS
            augment = dict(values.get("augment") or {})
            augment.setdefault("crop_size", SEGMENTATION_CROP if is_segmentation else REGRESSION_CROP)
            values["augment"] = augment
        else:
            defaults = {}
        for key, value in defaults.items():
            hyper.setdefault(key, value)
        values["hyper"] = hyper
        return values

    @model_validator(mode="after")
    def validate_kind(self):
        needs_model = (RunKind.PRETRAIN, RunKind.FINETUNE, RunKind.EVALUATE)
        if self.kind in needs_model and self.model is None:
            raise ValueError(f"{self.kind.value} 실행에는 model 이 필요합니다.")
        if self.kind in needs_model + (RunKind.SYNTH_DATA,) and self.data is None:
            raise ValueError(f"{self.kind.value} 실행에는 data 가 필요합니다.")
        if self.kind is RunKind.SYNTH_DATA and self.data.synthetic is None:
            raise ValueError("synth-data 실행에는 data.synthetic 이 필요합니다.")
        if self.kind in (RunKind.FINETUNE, RunKind.EVALUATE):
            if self.task is None or self.task is Task.PRETEXT:
                raise ValueError("finetune/evaluate 의 task 는 segmentation/denoise/noise_bg_removal/superres 중 하나여야 합니다.")
        if self.kind is RunKind.EVALUATE and self.evaluate is None:
            raise ValueError("evaluate 실행에는 evaluate.checkpoint_dir 이 필요합니다.")
        return self

    def effective(self) -> Dict[str, Any]:
        """effective_config.yaml 로 기록할 JSON 호환 dict"""
        return self.model_dump(mode="json")
