"""Exact backward induction for the monotone-price ticket pricing problem.

State is (period t, remaining inventory x, index i of the last posted
price); admissible actions are grid indices k >= i.  The value recursion is

    V(t, x, i) = max_{k >= i} E[ pi_k * min(N_k, x) + V(t+1, x - min(N_k, x), k) ]

with N_k Poisson(lambda(t, pi_k)) and V(T+1, ., .) = 0.  Expectations are
taken over an epsilon-truncated Poisson whose residual tail mass is folded
into the last bucket, so every expectation is over a proper distribution.

Arrays are laid out [t, i, x] so the per-(t, k) continuation convolution
runs over contiguous memory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .demand import DemandProfile, Environment, intensity_table, validate_environment

# exp(-rate) underflows past ~745; stay clear of the cliff.  Per-period
# demand above this is far outside the calibrations this engine targets.
RATE_MAX = 700.0

DEFAULT_EPSILON = 1e-12


def poisson_pmf_prefix(rate: float, n_cap: int | None = None) -> np.ndarray:
    """Poisson pmf for n = 0..n_cap via the forward recurrence.

    p_0 = exp(-rate), p_{n+1} = p_n * rate / (n+1).  The default cap is far
    enough into the tail that the omitted mass is negligible at double
    precision.  Every consumer of Poisson probabilities in this package goes
    through this one function, so draws and expectations share bit-identical
    tables.
    """
    if rate < 0:
        raise ValueError(f"poisson rate must be >= 0, got {rate}")
    if not math.isfinite(rate) or rate > RATE_MAX:
        raise ValueError(f"poisson rate {rate} above supported maximum {RATE_MAX}")
    if rate == 0:
        return np.ones(1)
    if n_cap is None:
        n_cap = int(math.ceil(rate + 40.0 * math.sqrt(rate + 1.0) + 64.0))
    pmf = np.empty(n_cap + 1)
    p0 = math.exp(-rate)
    pmf[0] = p0
    pmf[1:] = p0 * np.cumprod(rate / np.arange(1.0, n_cap + 1.0))
    return pmf


@dataclass(frozen=True)
class PoissonTable:
    """Truncated Poisson pmf with the residual tail folded into the top bucket."""

    rate: float
    pmf: np.ndarray
    tail_mass: float

    @property
    def n_max(self) -> int:
        return self.pmf.size - 1


def truncated_poisson_pmf(rate: float, epsilon: float = DEFAULT_EPSILON) -> PoissonTable:
    """Smallest table whose cumulative mass reaches 1 - epsilon, folded to sum 1."""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    pmf = poisson_pmf_prefix(rate)
    cdf = np.cumsum(pmf)
    n_max = int(np.searchsorted(cdf, 1.0 - epsilon, side="left"))
    n_max = min(n_max, pmf.size - 1)
    out = pmf[: n_max + 1].copy()
    residual = 1.0 - cdf[n_max]
    out[n_max] += residual
    return PoissonTable(rate, out, residual)


def expected_capped_sales(table: PoissonTable, x: int) -> float:
    """E[min(N, x)] under the truncated distribution."""
    if x < 0:
        raise ValueError(f"inventory must be >= 0, got {x}")
    n = np.arange(table.pmf.size)
    return float(np.sum(table.pmf * np.minimum(n, x)))


def sales_distribution(table: PoissonTable, x: int) -> np.ndarray:
    """Distribution of s = min(N, x) over s = 0..x; the top bucket is P(N >= x)."""
    if x < 0:
        raise ValueError(f"inventory must be >= 0, got {x}")
    out = np.zeros(x + 1)
    cut = min(x, table.pmf.size)
    out[:cut] = table.pmf[:cut]
    out[x] = np.sum(table.pmf) - np.sum(table.pmf[:cut])
    return out


def _capped_sales_curve(table: PoissonTable, q: int) -> np.ndarray:
    """E[min(N, x)] for every x = 0..q at once."""
    pmf = table.pmf
    prefix0 = np.concatenate(([0.0], np.cumsum(pmf)))
    prefix1 = np.concatenate(([0.0], np.cumsum(pmf * np.arange(pmf.size))))
    total = prefix0[-1]
    x = np.arange(q + 1)
    idx = np.minimum(x, pmf.size)
    return prefix1[idx] + x * (total - prefix0[idx])


@dataclass(frozen=True)
class ValueTable:
    """Expected revenue-to-go V(t, x, i); array indexed values[t, i, x]."""

    values: np.ndarray

    @property
    def horizon_t(self) -> int:
        return self.values.shape[0] - 2

    @property
    def inventory_q(self) -> int:
        return self.values.shape[2] - 1

    @property
    def num_prices(self) -> int:
        return self.values.shape[1]

    def value(self, t: int, x: int, i: int) -> float:
        if not (0 <= t <= self.horizon_t + 1 and 0 <= x <= self.inventory_q
                and 0 <= i < self.num_prices):
            raise ValueError(f"state (t={t}, x={x}, i={i}) outside table range")
        return float(self.values[t, i, x])


@dataclass(frozen=True)
class PolicyTable:
    """Optimal action k*(t, x, i); array indexed actions[t, i, x].

    ``profile_label``/``profile_is_oracle`` record which demand profile the
    policy was solved against.
    """

    actions: np.ndarray
    profile_label: str
    profile_is_oracle: bool

    @property
    def horizon_t(self) -> int:
        return self.actions.shape[0] - 1

    @property
    def inventory_q(self) -> int:
        return self.actions.shape[2] - 1

    @property
    def num_prices(self) -> int:
        return self.actions.shape[1]


def policy_action(policy: PolicyTable, t: int, x: int, i: int) -> int:
    """Look up k*(t, x, i); the caller then carries i_{t+1} = k."""
    if not (0 <= t <= policy.horizon_t and 0 <= x <= policy.inventory_q
            and 0 <= i < policy.num_prices):
        raise ValueError(f"state (t={t}, x={x}, i={i}) outside policy range")
    return int(policy.actions[t, i, x])


def solve_dp(profile: DemandProfile, env: Environment,
             epsilon: float = DEFAULT_EPSILON) -> tuple[ValueTable, PolicyTable]:
    """Backward pass from t = T down to 0 over all (x, i) states.

    Per (t, k) the Poisson table is built once and reused for every x and i:
    the action value W(t, k, x) does not depend on i, so V(t, x, i) is a
    running maximum of W over k >= i.  Ties break toward the lowest k, which
    keeps future price flexibility and makes the policy deterministic.
    """
    validate_environment(env)
    if profile.horizon_t != env.horizon_t:
        raise ValueError(
            f"profile has {profile.values.size} periods but environment expects "
            f"{env.horizon_t + 1}")
    T, Q, K = env.horizon_t, env.inventory_q, env.grid.k
    prices = np.asarray(env.grid.levels)
    rates = intensity_table(profile, env)

    values = np.zeros((T + 2, K, Q + 1))
    actions = np.zeros((T + 1, K, Q + 1), dtype=np.int16)
    w = np.empty((K, Q + 1))

    for t in range(T, -1, -1):
        for k in range(K):
            table = truncated_poisson_pmf(rates[t, k], epsilon)
            pmf = table.pmf[: Q + 1]
            w[k] = prices[k] * _capped_sales_curve(table, Q)
            w[k] += np.convolve(pmf, values[t + 1, k])[: Q + 1]
        best = w[K - 1].copy()
        arg = np.full(Q + 1, K - 1, dtype=np.int16)
        values[t, K - 1] = best
        actions[t, K - 1] = arg
        for i in range(K - 2, -1, -1):
            take = w[i] >= best
            best = np.where(take, w[i], best)
            arg = np.where(take, np.int16(i), arg)
            values[t, i] = best
            actions[t, i] = arg

    return (ValueTable(values),
            PolicyTable(actions, profile.label, profile.is_oracle))


def reachable_inventory_thresholds(policy: PolicyTable) -> np.ndarray:
    """Max inventory reachable per (t, last-price-index), -1 if unreachable.

    Starting from (x = Q, i = 0), a period with action k can leave any
    inventory from x down to 0, so the reachable set at each (t, i) is the
    full range 0..threshold.
    """
    T, K, Q = policy.horizon_t, policy.num_prices, policy.inventory_q
    thr = np.full((T + 2, K), -1, dtype=np.int64)
    thr[0, 0] = Q
    for t in range(T + 1):
        for i in range(K):
            if thr[t, i] < 0:
                continue
            acts = policy.actions[t, i, : thr[t, i] + 1]
            for k in np.unique(acts):
                top = int(np.max(np.nonzero(acts == k)[0]))
                if top > thr[t + 1, k]:
                    thr[t + 1, k] = top
    return thr


def policies_distinct(reference: PolicyTable, other: PolicyTable) -> bool:
    """True if the policies disagree at a state reachable under ``reference``.

    Two policies that agree on every reference-reachable state follow the
    same price path from (Q, i=0) no matter what demand realises, so they
    are behaviourally identical in simulation.
    """
    if reference.actions.shape != other.actions.shape:
        raise ValueError("policies cover different state spaces")
    thr = reachable_inventory_thresholds(reference)
    for t in range(reference.horizon_t + 1):
        for i in range(reference.num_prices):
            top = thr[t, i]
            if top < 0:
                continue
            if np.any(reference.actions[t, i, : top + 1] != other.actions[t, i, : top + 1]):
                return True
    return False


def save_policy(policy: PolicyTable, path) -> None:
    """Debug dump of the full action table plus provenance."""
    doc = {
        "profile_label": policy.profile_label,
        "profile_is_oracle": policy.profile_is_oracle,
        "horizon_t": policy.horizon_t,
        "inventory_q": policy.inventory_q,
        "num_prices": policy.num_prices,
        "layout": "actions[t][i][x]",
        "actions": policy.actions.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
