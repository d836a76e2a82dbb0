from abc import ABC, abstractmethod
from typing import TypeVar, Generic
import os

from exceptions import DataFileNotFoundError

T = TypeVar('T')

class BaseRepository(ABC, Generic[T]):
    """Base repository interface for file-backed domain data."""

    @abstractmethod
    def load(self, path: str) -> T:
        """Read an entity from ``path``."""
        pass

    @abstractmethod
    def save(self, path: str, entity: T) -> None:
        """Write an entity to ``path``."""
        pass

    @staticmethod
    def _require_file(path: str) -> None:
        if not os.path.isfile(path):
            raise DataFileNotFoundError(f"No such file: {path}")

    @staticmethod
    def _ensure_parent(path: str) -> None:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
