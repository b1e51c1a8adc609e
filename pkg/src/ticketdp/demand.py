"""Demand-model primitives shared by the DP solver and the simulator.

The purchase process in each period t is Poisson with rate

    lambda(t, p) = L(t) * v(p / phi(t)),

where L(t) is the total-demand profile (expected potential buyers per
period), v(p) = exp(-eta * p) is the price-response curve, and phi(t) >= 1
is a willingness-to-pay factor that rises near the sales deadline and makes
buyers less price-sensitive late in the horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEADLINE_KINDS = ("flat", "moderate", "strong")

# Default market calibration: a two-month daily selling window and a price
# grid bracketing the unconstrained revenue-maximising price for the default
# eta values (p* = phi/eta is 77..133 for eta in 0.0075..0.0130).
DEFAULT_HORIZON = 60
DEFAULT_PRICE_LEVELS = tuple(float(p) for p in range(40, 161, 10))
DEFAULT_RAMP_WINDOW = 10
DEFAULT_MODERATE_COEFF = 0.5
DEFAULT_STRONG_COEFF = 1.5


@dataclass(frozen=True)
class PriceGrid:
    """Finite ordered set of admissible prices pi_1 < ... < pi_K."""

    levels: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(p) for p in self.levels))

    @property
    def k(self) -> int:
        return len(self.levels)

    def violations(self) -> list[str]:
        out = []
        if self.k < 2:
            out.append("grid: needs at least 2 price levels")
        if any(p <= 0 for p in self.levels):
            out.append("grid: all levels must be positive")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            out.append("grid: not strictly increasing")
        return out


@dataclass(frozen=True)
class DeadlineRegime:
    """Shape of phi(t): flat, or a quadratic ramp over the last periods.

    For the ramp regimes phi(t) = 1 + intensity_coeff * r(t) with r(t) = 0
    for t <= T - ramp_window and r(t) = ((t - (T - ramp_window)) / ramp_window)^2
    afterwards, so phi rises convexly from 1 to 1 + intensity_coeff at t = T.
    """

    kind: str
    ramp_window: int = DEFAULT_RAMP_WINDOW
    intensity_coeff: float = 0.0

    def violations(self) -> list[str]:
        out = []
        if self.kind not in DEADLINE_KINDS:
            out.append(f"deadline.kind: unknown kind {self.kind!r}")
        if self.kind != "flat":
            if self.ramp_window < 1:
                out.append("deadline.ramp_window: must be >= 1")
            if self.intensity_coeff < 0:
                out.append("deadline.intensity_coeff: must be >= 0")
        return out


def flat_regime() -> DeadlineRegime:
    return DeadlineRegime("flat")


def moderate_regime(ramp_window: int = DEFAULT_RAMP_WINDOW,
                    coeff: float = DEFAULT_MODERATE_COEFF) -> DeadlineRegime:
    return DeadlineRegime("moderate", ramp_window, coeff)


def strong_regime(ramp_window: int = DEFAULT_RAMP_WINDOW,
                  coeff: float = DEFAULT_STRONG_COEFF) -> DeadlineRegime:
    return DeadlineRegime("strong", ramp_window, coeff)


def regime_from_kind(kind: str, ramp_window: int = DEFAULT_RAMP_WINDOW,
                     moderate_coeff: float = DEFAULT_MODERATE_COEFF,
                     strong_coeff: float = DEFAULT_STRONG_COEFF) -> DeadlineRegime:
    if kind == "flat":
        return flat_regime()
    if kind == "moderate":
        return moderate_regime(ramp_window, moderate_coeff)
    if kind == "strong":
        return strong_regime(ramp_window, strong_coeff)
    raise ValueError(f"unknown deadline regime kind {kind!r}")


@dataclass(frozen=True)
class Environment:
    """One market-grid cell: price sensitivity, deadline regime, inventory."""

    eta: float
    deadline: DeadlineRegime
    inventory_q: int
    horizon_t: int
    grid: PriceGrid = field(default_factory=lambda: PriceGrid(DEFAULT_PRICE_LEVELS))

    def violations(self) -> list[str]:
        out = []
        if not self.eta > 0:
            out.append("eta: must be positive")
        if not self.inventory_q > 0:
            out.append("inventory_q: must be positive")
        if self.horizon_t < 1:
            out.append("horizon_t: must be >= 1")
        out.extend(self.grid.violations())
        out.extend(self.deadline.violations())
        return out


@dataclass(frozen=True)
class DemandProfile:
    """Discrete total-demand curve L(0..T) with provenance.

    ``is_oracle`` marks the true scenario curve; proxies built by perturbing
    a scenario carry ``is_oracle=False`` and a label naming the error type.
    """

    values: np.ndarray
    label: str
    is_oracle: bool = True

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("profile values must be a non-empty 1-d array")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ValueError(f"profile {self.label!r}: values must be finite and >= 0")
        if not np.any(vals > 0):
            raise ValueError(f"profile {self.label!r}: needs at least one positive value")

    @property
    def horizon_t(self) -> int:
        return self.values.size - 1


def price_response(p: float, eta: float) -> float:
    """Fraction of arriving customers willing to buy at price p: exp(-eta*p)."""
    if p < 0:
        raise ValueError(f"price must be >= 0, got {p}")
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    return math.exp(-eta * p)


def deadline_factor(t: int, regime: DeadlineRegime, horizon_t: int) -> float:
    """Willingness-to-pay factor phi(t) >= 1, non-decreasing in t."""
    if t < 0 or t > horizon_t:
        raise ValueError(f"period {t} outside 0..{horizon_t}")
    if regime.kind == "flat":
        return 1.0
    ramp_start = horizon_t - regime.ramp_window
    if t <= ramp_start:
        return 1.0
    r = (t - ramp_start) / regime.ramp_window
    return 1.0 + regime.intensity_coeff * r * r


def intensity(t: int, p: float, profile: DemandProfile, env: Environment) -> float:
    """Poisson purchase rate lambda(t, p) = L(t) * v(p / phi(t)).

    Policy prices are grid-restricted, so p must be one of env.grid.levels.
    """
    if p not in env.grid.levels:
        raise ValueError(f"price {p} is not on the grid {env.grid.levels}")
    if profile.horizon_t != env.horizon_t:
        raise ValueError(
            f"profile length {profile.values.size} does not match horizon T={env.horizon_t}")
    phi = deadline_factor(t, env.deadline, env.horizon_t)
    return float(profile.values[t]) * price_response(p / phi, env.eta)


def intensity_table(profile: DemandProfile, env: Environment) -> np.ndarray:
    """lambda(t, pi_k) for every period and grid index, shape (T+1, K).

    Built by calling :func:`intensity` entry by entry so the solver and the
    simulator consume bit-identical rates.
    """
    T = env.horizon_t
    table = np.empty((T + 1, env.grid.k))
    for t in range(T + 1):
        for k, p in enumerate(env.grid.levels):
            table[t, k] = intensity(t, p, profile, env)
    return table


def validate_environment(env: Environment) -> Environment:
    """Check every Environment invariant; raise listing all violations."""
    problems = env.violations()
    if problems:
        raise ValueError("invalid environment: " + "; ".join(problems))
    return env
