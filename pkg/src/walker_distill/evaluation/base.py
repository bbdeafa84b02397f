"""Base classes for policies under evaluation."""

import logging
from abc import ABC, abstractmethod
from pathlib import Path

import numpy as np

from ..checkpoint import read_manifest
from ..errors import ConfigurationError

logger = logging.getLogger(__name__)


class BasePolicy(ABC):
    """Abstract base class for controllers driven by the evaluation harness."""

    kind: str  # checkpoint manifest kind
    display_name: str  # Human-readable name

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._loaded = False

    @property
    def is_loaded(self) -> bool:
        return self._loaded

    @property
    def model_id(self) -> str:
        return str(self.path) if self.path is not None else self.kind

    @property
    @abstractmethod
    def obs_dim(self) -> int:
        pass

    @property
    @abstractmethod
    def act_dim(self) -> int:
        pass

    @abstractmethod
    def load(self) -> None:
        """Load weights into memory."""
        pass

    def unload(self) -> None:
        self._loaded = False

    @abstractmethod
    def reset(self, num_envs: int, seed: int) -> None:
        """Start a fresh batch of episodes."""
        pass

    def reset_envs(self, ids) -> None:
        """Episodes ``ids`` restarted; the default is stateless."""

    @abstractmethod
    def act(self, obs: np.ndarray) -> np.ndarray:
        """Map a (B, obs_dim) observation batch to (B, act_dim) actions."""
        pass


class PolicyRegistry:
    """Registry for policy kinds that can be evaluated."""

    _policies: dict[str, type[BasePolicy]] = {}

    @classmethod
    def register(cls, kind: str, policy_class: type[BasePolicy]) -> None:
        cls._policies[kind] = policy_class
        logger.debug(f"Registered policy kind: {kind}")

    @classmethod
    def get_available_kinds(cls) -> list[str]:
        return list(cls._policies.keys())

    @classmethod
    def create(cls, kind: str, path: str | Path | None = None) -> BasePolicy:
        if kind not in cls._policies:
            raise ConfigurationError(
                f"Unknown policy kind: {kind!r} (available: {cls.get_available_kinds()})"
            )
        return cls._policies[kind](path)

    @classmethod
    def load_policy(cls, spec: str | Path) -> BasePolicy:
        """Load a checkpoint directory by its manifest kind, or a built-in kind by name."""
        if str(spec) in cls._policies and not Path(spec).exists():
            policy = cls.create(str(spec))
        else:
            kind = read_manifest(spec).get("kind")
            policy = cls.create(kind, spec)
        logger.info(f"Loading {policy.kind} policy: {policy.model_id}")
        policy.load()
        return policy
