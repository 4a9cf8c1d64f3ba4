from abc import ABC, abstractmethod
from typing import Iterator, List

from src.config.settings import Task
from src.models.sample import SamplePair


class SampleSource(ABC):
    """읽기 전용 샘플 집합. 생성 후 변경되지 않으므로 여러 worker 에서 동시에 열거해도 안전하다."""

    task: Task

    @abstractmethod
    def __len__(self) -> int:
        pass

    @abstractmethod
    def get(self, index: int) -> SamplePair:
        """index 번째 SamplePair 반환"""
        pass

    def names(self) -> List[str]:
        """샘플 식별자 목록 (정렬 순서)"""
        return [f"{i:06d}" for i in range(len(self))]

    @property
    def tasks(self) -> List[Task]:
        return [self.task]

    def __getitem__(self, index: int) -> SamplePair:
        if not 0 <= index < len(self):
            raise IndexError(index)
        return self.get(index)

    def __iter__(self) -> Iterator[SamplePair]:
        for index in range(len(self)):
            yield self.get(index)
