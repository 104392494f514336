from dataclasses import asdict, dataclass
from enum import Enum

from .errors import ConfigurationError
from .regression import SfhBound

DEFAULT_GAMMA = 0.5


class Algorithm(str, Enum):
    """Available fixed-Hessian trainers."""
    LINEAR = "linear"
    RIDGE = "ridge"
    LFFR = "lffr"
    IMPROVED_LFFR = "improved-lffr"


class SigmoidKind(str, Enum):
    """Sigmoid used inside the LFFR gradient."""
    EXACT = "exact"
    POLY3 = "poly3"


ALGORITHM_DESCRIPTIONS = {
    Algorithm.LINEAR: "Least squares with the absolute-row-sum fixed Hessian (2 X^T X bound)",
    Algorithm.RIDGE: "Ridge regression; bias left unpenalised in both gradient and Hessian",
    Algorithm.LFFR: "Sigmoid output with squared error on unit-scaled targets (0.155 X^T X bound)",
    Algorithm.IMPROVED_LFFR: "Linear regression on gamma-windowed logit targets, sigmoid at inference",
}

ENCRYPTED_ALGORITHMS = {Algorithm.LINEAR, Algorithm.LFFR, Algorithm.IMPROVED_LFFR}


@dataclass
class TrainConfig:
    """Configuration for one training run."""
    algorithm: Algorithm = Algorithm.LINEAR
    iterations: int = 30
    lam: float = 0.0
    gamma: float = DEFAULT_GAMMA
    sigmoid_kind: SigmoidKind = SigmoidKind.EXACT
    normalize_targets: bool = False
    bound: SfhBound = SfhBound.ENTRYWISE
    epsilon: float = 1e-8

    def __post_init__(self):
        """Validate configuration."""
        for name, enum_type in (("algorithm", Algorithm), ("sigmoid_kind", SigmoidKind), ("bound", SfhBound)):
            value = getattr(self, name)
            if not isinstance(value, enum_type):
                try:
                    setattr(self, name, enum_type(value))
                except ValueError:
                    raise ConfigurationError(
                        f"Invalid {name}: {value}. Must be one of: {', '.join(e.value for e in enum_type)}"
                    )
        if self.iterations < 1:
            raise ConfigurationError("Number of iterations must be at least 1")
        if self.lam < 0:
            raise ConfigurationError("lambda must be non-negative")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigurationError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")

    def to_document(self) -> dict:
        doc = asdict(self)
        for name in ("algorithm", "sigmoid_kind", "bound"):
            doc[name] = getattr(self, name).value
        return doc

    @classmethod
    def from_document(cls, doc: dict) -> "TrainConfig":
        return cls(**doc)
