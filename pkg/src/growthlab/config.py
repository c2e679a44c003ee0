"""Every numerical tolerance in one place.

Run manifests record ``defaults()`` (with overrides applied) so a replay sees
exactly the settings of the original run.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from .numtheory import FLOAT_ENDPOINT_TOL


@dataclass(frozen=True)
class RotationParams:
    max_iter: int = 10_000
    recurrence_eps: float = 0.02
    period_cap: int = 64
    periodic_tol: float = 1e-9


@dataclass(frozen=True)
class SolverParams:
    grid: tuple = (512, 512)
    tol: float = 1e-10
    dedup_eps: float = 1e-7
    fd_step: float = 1e-6
    newton_steps: int = 40
    max_halvings: int = 12
    interior_margin: float = 1e-9
    singular_tol: float = 1e-7
    retry_doubled_grid: bool = True

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(int(g) for g in self.grid))

    def as_dict(self):
        d = asdict(self)
        d["grid"] = list(self.grid)
        return d

    def with_(self, **kw) -> "SolverParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class GeodesicParams:
    step: float = 0.05              # fixed DOP853 step for batched flights
    energy_tol: float = 1e-9        # relative drift allowed per flight
    crossing_tol: float = 1e-15     # |q3| at a located crossing
    crossing_iters: int = 60
    chart_tol: float = 1e-9         # distance to the section curve for the chart inverse
    max_flight_factor: float = 4.0  # flights longer than this many delta are errors
    jacobi_rtol: float = 1e-12
    conjugate_samples: int = 256    # Fourier samples of the conjugate-distance function
    arclength_modes: int = 1024
    loop_resolution: int = 256
    loop_tol: float = 1e-6
    flight_margin: float = 0.02
    closure_tol: float = 1e-6
    claim_tol: float = 1e-6
    max_lift_displacement: float = 0.45   # principal-lift continuity guard (fraction of delta)
    census_grid: tuple = (64, 64)
    fit_min_period: int = 3         # N(l) fit starts at fit_min_period * t_lo

    def __post_init__(self):
        object.__setattr__(self, "census_grid", tuple(int(g) for g in self.census_grid))

    def as_dict(self):
        d = asdict(self)
        d["census_grid"] = list(self.census_grid)
        return d


def defaults() -> dict:
    return {
        "numtheory": {"float_endpoint_tol": FLOAT_ENDPOINT_TOL},
        "rotation": asdict(RotationParams()),
        "orbits": SolverParams().as_dict(),
        "geodesics": GeodesicParams().as_dict(),
    }


def apply_overrides(params, overrides: dict):
    """Return a copy of a params dataclass with validated overrides."""
    known = {f.name: f for f in fields(params)}
    clean = {}
    for key, value in overrides.items():
        if key not in known:
            raise KeyError(f"unknown setting {key!r} for {type(params).__name__}")
        current = getattr(params, key)
        if isinstance(current, tuple):
            value = tuple(int(v) for v in (value.split("x") if isinstance(value, str) else value))
        elif isinstance(current, bool):
            value = value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
        else:
            value = type(current)(value)
        clean[key] = value
    return replace(params, **clean)
