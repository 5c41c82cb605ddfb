"""Base artifact store interface."""

from abc import ABC, abstractmethod
from typing import Dict, Sequence, Tuple

import numpy as np


class ArtifactStore(ABC):
    """Abstract artifact store."""

    @abstractmethod
    def save(self, path: str, kind: str, arrays: Sequence[Tuple[str, np.ndarray]],
             metadata: dict = None) -> str:
        """Persist arrays + metadata under path. Returns the written location."""
        raise NotImplementedError

    @abstractmethod
    def load(self, path: str, expected_kind: str = None) -> Tuple[dict, Dict[str, np.ndarray]]:
        """Return (header, arrays) for the artifact at path."""
        raise NotImplementedError
