"""Stochastic sales simulation under common random numbers.

Each run owns one uniform per period, derived from a counter-based
generator seeded by (master seed, scenario, environment, run index).  The
period's demand draw is the inverse Poisson CDF of that uniform at the
posted price's rate, so two policies evaluated on the same run key see
demand that differs only through the rate lambda(t, p(t)) — the coupling
that makes paired revenue differences meaningful.  The policy is never part
of the seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .demand import DemandProfile, Environment, intensity_table, validate_environment
from .dp import PolicyTable, poisson_pmf_prefix


@dataclass(frozen=True)
class RunKey:
    """Identity of one simulation run; the seed is a pure function of it."""

    master_seed: int
    scenario_id: str
    env_id: str
    run_index: int


def derive_run_seed(key: RunKey) -> int:
    """64-bit seed hashed from the key fields; policy-independent by design."""
    msg = f"{key.master_seed}|{key.scenario_id}|{key.env_id}|{key.run_index}"
    digest = hashlib.blake2b(msg.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def uniform_stream(seed: int, length: int) -> np.ndarray:
    """Reproducible uniforms strictly inside (0, 1), one per period.

    Philox is counter-based, so streams for different runs can be produced
    in any order (or in parallel) with identical results.  Drawing 53-bit
    integers and centring them keeps every value strictly interior.
    """
    if length < 1:
        raise ValueError(f"stream length must be >= 1, got {length}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    ints = rng.integers(0, 1 << 53, size=length, dtype=np.int64)
    return (ints + 0.5) * 2.0 ** -53


def run_uniforms(master_seed: int, scenario_id: str, env_id: str,
                 num_runs: int, length: int) -> np.ndarray:
    """Uniform streams for runs m = 1..num_runs, stacked as (num_runs, length)."""
    return np.stack([
        uniform_stream(derive_run_seed(RunKey(master_seed, scenario_id, env_id, m)), length)
        for m in range(1, num_runs + 1)])


def poisson_inverse_cdf(rate: float, u):
    """Smallest n with CDF_rate(n) >= u; vectorised over an array of u.

    The CDF comes from the same forward pmf recurrence the solver uses.
    For fixed u the result is non-decreasing in rate, which is exactly the
    monotone coupling property the simulation relies on.
    """
    u_arr = np.asarray(u, dtype=float)
    if u_arr.size and (np.any(u_arr <= 0.0) or np.any(u_arr >= 1.0)):
        raise ValueError("uniforms must lie strictly inside (0, 1)")
    cdf = np.cumsum(poisson_pmf_prefix(rate))
    out = np.searchsorted(cdf, u_arr, side="left")
    if u_arr.ndim == 0:
        return int(out)
    return out.astype(np.int64)


@dataclass(frozen=True)
class Trajectory:
    """One simulated sales path; inventory has T+2 entries (x(0)..x(T+1))."""

    price_indices: np.ndarray
    prices: np.ndarray
    demand: np.ndarray
    sales: np.ndarray
    inventory: np.ndarray
    revenue: float


def _simulate(policy: PolicyTable, true_profile: DemandProfile, env: Environment,
              uniforms: np.ndarray, record: bool):
    """Vectorised stepper over runs; the scalar path is the same code with M=1."""
    validate_environment(env)
    if not true_profile.is_oracle:
        raise ValueError(
            f"simulation must run under a true profile; {true_profile.label!r} is a proxy")
    T, Q = env.horizon_t, env.inventory_q
    if true_profile.horizon_t != T:
        raise ValueError(
            f"true profile has {true_profile.values.size} periods, expected {T + 1}")
    if policy.horizon_t != T or policy.inventory_q != Q or policy.num_prices != env.grid.k:
        raise ValueError("policy table does not match the environment dimensions")
    if uniforms.ndim != 2 or uniforms.shape[1] != T + 1:
        raise ValueError(f"uniforms must have shape (runs, {T + 1})")

    rates = intensity_table(true_profile, env)
    prices = np.asarray(env.grid.levels)
    m = uniforms.shape[0]
    x = np.full(m, Q, dtype=np.int64)
    i = np.zeros(m, dtype=np.int64)
    revenue = np.zeros(m)
    rec = None
    if record:
        rec = {
            "price_indices": np.empty((m, T + 1), dtype=np.int64),
            "demand": np.empty((m, T + 1), dtype=np.int64),
            "sales": np.empty((m, T + 1), dtype=np.int64),
            "inventory": np.empty((m, T + 2), dtype=np.int64),
        }
        rec["inventory"][:, 0] = Q

    for t in range(T + 1):
        k = policy.actions[t, i, x].astype(np.int64)
        u_t = uniforms[:, t]
        n = np.empty(m, dtype=np.int64)
        for kk in np.unique(k):
            mask = k == kk
            n[mask] = poisson_inverse_cdf(rates[t, kk], u_t[mask])
        s = np.minimum(n, x)
        revenue += prices[k] * s
        x = x - s
        i = k
        if record:
            rec["price_indices"][:, t] = k
            rec["demand"][:, t] = n
            rec["sales"][:, t] = s
            rec["inventory"][:, t + 1] = x
    return revenue, rec


def simulate_revenues(policy: PolicyTable, true_profile: DemandProfile,
                      env: Environment, uniforms: np.ndarray) -> np.ndarray:
    """Revenue of each run in a (runs, T+1) uniform matrix."""
    revenue, _ = _simulate(policy, true_profile, env, uniforms, record=False)
    return revenue


def simulate_trajectory(policy: PolicyTable, true_profile: DemandProfile,
                        env: Environment, uniforms: np.ndarray) -> Trajectory:
    """Full sales path for a single run driven by T+1 uniforms."""
    uniforms = np.asarray(uniforms, dtype=float)
    if uniforms.ndim != 1:
        raise ValueError("simulate_trajectory expects a 1-d uniform stream")
    revenue, rec = _simulate(policy, true_profile, env, uniforms[None, :], record=True)
    idx = rec["price_indices"][0]
    return Trajectory(
        price_indices=idx,
        prices=np.asarray(env.grid.levels)[idx],
        demand=rec["demand"][0],
        sales=rec["sales"][0],
        inventory=rec["inventory"][0],
        revenue=float(revenue[0]),
    )
