"""Run configuration dataclasses shared by the CLI, scripts and tests."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

from .conjugate import ClassifyTolerances
from .geodesic import IntegrationOptions


@dataclass(frozen=True)
class SuiteSizes:
    """Sample counts of the property suites."""

    abel_samples: int = 100
    sign_samples: int = 100
    limit_sequences: int = 10
    conservation_samples: int = 100
    conservation_horizon: float = 20.0
    ordering_samples: int = 500
    boundary_cases: int = 20
    accumulation_zeros: int = 20

    @classmethod
    def quick(cls):
        return cls(abel_samples=10, sign_samples=5, limit_sequences=2, conservation_samples=10,
                   ordering_samples=30, boundary_cases=8, accumulation_zeros=20)


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run; written to config.json next to its outputs."""

    command: str
    spec_path: str | None = None
    manifold: dict | None = None
    out: str = "runs"
    run_id: str | None = None
    seed: int = 0
    horizon: float = 20.0
    i: int | None = None
    j: int | None = None
    grid: tuple | None = None
    u: tuple | None = None
    classify: bool = True
    quick: bool = False
    integration: IntegrationOptions = field(default_factory=IntegrationOptions)
    tolerances: ClassifyTolerances = field(default_factory=ClassifyTolerances)
    sizes: SuiteSizes = field(default_factory=SuiteSizes)

    def __post_init__(self):
        for group in (self.integration, self.tolerances):
            for f in fields(group):
                v = getattr(group, f.name)
                if isinstance(v, float) and not v > 0:
                    raise ValueError(f"tolerance {f.name} must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    def to_dict(self):
        d = asdict(self)
        d["grid"] = None if self.grid is None else list(self.grid)
        d["u"] = None if self.u is None else list(self.u)
        return d

    def with_overrides(self, **kw):
        return replace(self, **kw)


__all__ = ["SuiteSizes", "RunConfig"]
