class AppException(Exception):
    """기본 커스텀 예외 베이스 클래스."""
    pass

class ModelSpecError(AppException):
    """모델 스펙(계열, 블록 수, 수용 영역 조합 등)이 잘못된 경우의 예외."""
    pass

class ProbeSizeError(ModelSpecError):
    """수용 영역 측정 입력이 footprint 를 담기에 너무 작은 경우의 예외."""
    pass

class TransferError(AppException):
    """가중치 전이 실패 예외."""
    pass

class DatasetError(AppException):
    """데이터셋 적재/구성 실패 예외."""
    pass

class SynthesisError(DatasetError):
    """합성 코퍼스 파라미터가 퇴화된 경우의 예외."""
    pass

class AugmentationError(DatasetError):
    """증강 정책을 적용할 수 없는 경우의 예외."""
    pass

class LossInputError(AppException):
    """손실 함수 입력(빈 배치, shape 불일치)이 잘못된 경우의 예외."""
    pass

class TrainingDivergedError(AppException):
    """학습 중 손실이 NaN/Inf 로 발산한 경우의 예외."""
    pass

class CheckpointError(AppException):
    """체크포인트 저장/로드 실패 예외."""
    pass

class ChecksumError(CheckpointError):
    """체크포인트 파일 손상(체크섬 불일치, 잘린 파일) 예외."""
    pass

class CheckpointVersionError(CheckpointError):
    """지원하지 않는 체크포인트 포맷 버전 예외."""
    pass

class MetricError(AppException):
    """지표 계산/테이블 구성 실패 예외."""
    pass

class ConfigError(AppException):
    """실험 설정 검증 실패 예외."""
    pass
