"""Independent reference implementations used as oracles by the tests.

Deliberately naive: plain dict/loop state sweeps, scipy Poisson pmfs and
untruncated partial sums, sharing no code with the package's solver.
"""

import itertools
import math

import numpy as np
from scipy import stats


def reference_phi(t, kind, ramp_window, coeff, horizon_t):
    if kind == "flat":
        return 1.0
    start = horizon_t - ramp_window
    if t <= start:
        return 1.0
    return 1.0 + coeff * ((t - start) / ramp_window) ** 2


def reference_rate(t, price, profile_values, eta, kind, ramp_window, coeff, horizon_t):
    phi = reference_phi(t, kind, ramp_window, coeff, horizon_t)
    return profile_values[t] * math.exp(-eta * price / phi)


def brute_force_value(profile_values, env, n_sum=50):
    """Naive triple-loop backward recursion; expectation summed to n_sum."""
    T, Q, K = env.horizon_t, env.inventory_q, env.grid.k
    prices = env.grid.levels
    kind = env.deadline.kind
    rw, coeff = env.deadline.ramp_window, env.deadline.intensity_coeff
    ns = np.arange(n_sum + 1)
    v = np.zeros((T + 2, Q + 1, K))
    for t in range(T, -1, -1):
        pmfs = [stats.poisson.pmf(ns, reference_rate(t, prices[k], profile_values,
                                                     env.eta, kind, rw, coeff, T))
                for k in range(K)]
        for x in range(Q + 1):
            for i in range(K):
                best = -math.inf
                for k in range(i, K):
                    val = 0.0
                    for n in range(n_sum + 1):
                        s = min(n, x)
                        val += pmfs[k][n] * (prices[k] * s + v[t + 1, x - s, k])
                    best = max(best, val)
                v[t, x, i] = best
    return v[0, Q, 0]


def monotone_price_paths(num_prices, num_periods):
    """All non-decreasing index sequences of the given length."""
    return list(itertools.combinations_with_replacement(range(num_prices), num_periods))


def open_loop_expected_revenue(path, profile_values, env, n_sum=50):
    """Forward expectation recursion for a fixed monotone price path."""
    T, Q = env.horizon_t, env.inventory_q
    prices = env.grid.levels
    kind = env.deadline.kind
    rw, coeff = env.deadline.ramp_window, env.deadline.intensity_coeff
    ns = np.arange(n_sum + 1)
    dist = np.zeros(Q + 1)
    dist[Q] = 1.0
    total = 0.0
    for t in range(T + 1):
        price = prices[path[t]]
        rate = reference_rate(t, price, profile_values, env.eta, kind, rw, coeff, T)
        pmf = stats.poisson.pmf(ns, rate)
        nxt = np.zeros(Q + 1)
        for x in range(Q + 1):
            if dist[x] == 0.0:
                continue
            for n in range(n_sum + 1):
                s = min(n, x)
                total += dist[x] * pmf[n] * price * s
                nxt[x - s] += dist[x] * pmf[n]
        dist = nxt
    return total
