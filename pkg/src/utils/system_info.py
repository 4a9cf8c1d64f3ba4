import json
import os
import platform
from datetime import datetime
from typing import Dict, Any

import numpy as np
import psutil
import torch

from src.config.settings import runtime_config
from src.utils.logger import get_logger

logger = get_logger(__name__)


class SystemInfoCollector:
    """실행 환경 정보 수집 클래스 (재현성 기록용)"""

    @staticmethod
    def get_environment_info() -> Dict[str, Any]:
        """전체 실행 환경 정보 수집"""
        try:
            return {
                "timestamp": datetime.now().isoformat(),
                "system": SystemInfoCollector._get_system_info(),
                "cpu": SystemInfoCollector._get_cpu_info(),
                "memory": SystemInfoCollector._get_memory_info(),
                "libraries": SystemInfoCollector._get_library_info(),
                "runtime": SystemInfoCollector._get_runtime_info()
            }
        except Exception as e:
            logger.error(f"실행 환경 정보 수집 중 오류 발생: {e}")
            return {
                "timestamp": datetime.now().isoformat(),
                "error": f"실행 환경 정보 수집 실패: {str(e)}"
            }

    @staticmethod
    def _get_system_info() -> Dict[str, Any]:
        """시스템 기본 정보"""
        return {
            "platform": platform.system(),
            "platform_version": platform.version(),
            "architecture": platform.machine(),
            "hostname": platform.node(),
            "python_version": platform.python_version()
        }

    @staticmethod
    def _get_cpu_info() -> Dict[str, Any]:
        """CPU 정보"""
        return {
            "count_logical": psutil.cpu_count(),
            "count_physical": psutil.cpu_count(logical=False),
            "torch_threads": torch.get_num_threads()
        }

    @staticmethod
    def _get_memory_info() -> Dict[str, Any]:
        """메모리 정보"""
        memory = psutil.virtual_memory()
        return {
            "total_gb": round(memory.total / (1024**3), 2),
            "available_gb": round(memory.available / (1024**3), 2)
        }

    @staticmethod
    def _get_library_info() -> Dict[str, Any]:
        """주요 라이브러리 버전"""
        return {
            "torch": torch.__version__,
            "numpy": np.__version__,
            "cuda_available": torch.cuda.is_available()
        }

    @staticmethod
    def _get_runtime_info() -> Dict[str, Any]:
        """런타임 설정 (결정적 모드 등)"""
        return {
            "deterministic": runtime_config.deterministic,
            "device": runtime_config.device,
            "num_workers": runtime_config.num_workers,
            "pid": os.getpid()
        }

    @staticmethod
    def write_environment(output_dir: str, file_name: str = "environment.json") -> str:
        """실행 환경 정보를 결과 디렉토리에 JSON 으로 기록"""
        path = os.path.join(output_dir, file_name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(SystemInfoCollector.get_environment_info(), f, indent=2, ensure_ascii=False)
        return path
