from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.config.settings import HeadKind, MetricKind, Task
from src.models.model_spec import ModelSpec
from src.models.training import TrainHyper

CHECKPOINT_FORMAT_VERSION = 1


class CheckpointRecord(BaseModel):
    """저장된 파라미터 + 에폭 + 최고 검증 지표 + 출처 태그"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    spec: ModelSpec = Field(description="네트워크 스펙")
    parameters: Dict[str, Any] = Field(description="이름별 파라미터 텐서 (state_dict)")
    epoch: int = Field(ge=0, description="저장 시점 에폭")
    best_val_metric: float = Field(description="저장된 파라미터의 검증 지표")
    metric_kind: MetricKind = Field(description="검증 지표 종류")
    task: Task = Field(description="학습 태스크")
    head_kind: HeadKind = Field(description="헤드 종류")
    provenance: str = Field(description="출처 태그 (예: R, P(100k))")
    hyper: Optional[TrainHyper] = Field(default=None, description="학습 하이퍼파라미터")
    source_epoch: Optional[int] = Field(default=None, description="파라미터가 실제로 얻어진 에폭")
    format_version: int = Field(default=CHECKPOINT_FORMAT_VERSION, description="체크포인트 포맷 버전")

    def metadata(self) -> Dict[str, Any]:
        """파라미터를 제외한 메타데이터 (JSON 직렬화 가능)"""
        return self.model_dump(mode="json", exclude={"parameters"})


class TransferReport(BaseModel):
    """가중치 전이 결과 보고서"""
    transferred: List[str] = Field(default_factory=list, description="복사된 파라미터 이름")
    skipped: List[str] = Field(default_factory=list, description="원본에만 있거나 shape 이 달라 건너뛴 이름")
    missing: List[str] = Field(default_factory=list, description="대상에서 채워지지 않은 이름")

    @property
    def transfer_ratio(self) -> float:
        total = len(self.transferred) + len(self.missing)
        return len(self.transferred) / total if total else 0.0


class MetricSeries(BaseModel):
    """에폭 → 지표 값 시계열"""
    kind: MetricKind = Field(description="지표 종류")
    label: str = Field(default="", description="범례용 라벨 (스펙 + 초기화)")
    values: Dict[int, float] = Field(default_factory=dict, description="에폭별 값")
    initial: Optional[float] = Field(default=None, description="학습 전 (에폭 0) 값")

    def add(self, epoch: int, value: float):
        if self.values and epoch <= max(self.values):
            raise ValueError(f"에폭은 증가해야 합니다: {epoch}")
        self.values[epoch] = float(value)

    @property
    def epochs(self) -> List[int]:
        return sorted(self.values)

    def __len__(self) -> int:
        return len(self.values)


class MetricRow(BaseModel):
    """MetricTable 의 한 행: (스펙, 초기화) → 체크포인트 에폭별 값"""
    spec: str = Field(description="모델 스펙 이름")
    init: str = Field(description="초기화 태그 (R, P(50k), ...)")
    values: Dict[int, float] = Field(description="에폭별 지표 값")


class MetricTable(BaseModel):
    """부록 표 형태의 지표 테이블"""
    metric: MetricKind = Field(description="지표 종류")
    rows: List[MetricRow] = Field(default_factory=list, description="행 목록")

    @model_validator(mode="after")
    def validate_rectangular(self):
        if self.rows:
            epochs = sorted(self.rows[0].values)
            for row in self.rows[1:]:
                if sorted(row.values) != epochs:
                    raise ValueError(f"테이블이 직사각형이 아닙니다: {row.spec}/{row.init}")
            keys = [(row.spec, row.init) for row in self.rows]
            if len(set(keys)) != len(keys):
                raise ValueError("중복된 (spec, init) 행이 있습니다.")
        return self

    @property
    def epochs(self) -> List[int]:
        return sorted(self.rows[0].values) if self.rows else []

    def merge(self, rows: List[MetricRow]) -> "MetricTable":
        """행을 추가한 새 테이블 반환"""
        return MetricTable(metric=self.metric, rows=[*self.rows, *rows])
