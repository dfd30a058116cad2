"""Closed-form mean-field baseline for the majority-rule dynamics.

Each neuron is assumed to see kbar neighbors sampled independently from an
infinite well-mixed population with activation density rho, giving a scalar
map rho -> f(rho). Note f(0) = eps > 0: the mean field has no absorbing
all-off state, unlike the network model whose activation rule requires at
least one active neighbor. The comparison report surfaces this mismatch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_KBAR = 64


@dataclass(frozen=True)
class MfParams:
    eps: float
    kbar: int

    def __post_init__(self):
        if not (0.0 < self.eps < 0.5):
            raise ValueError(f"eps must lie in (0, 0.5), got {self.eps}")
        if not isinstance(self.kbar, (int, np.integer)) or self.kbar < 2:
            raise ValueError(f"kbar must be an integer >= 2, got {self.kbar!r}")
        if self.kbar % 2 != 0:
            raise ValueError(f"kbar must be even (the majority boundary kbar/2 "
                             f"must be integral), got {self.kbar}")
        if self.kbar > MAX_KBAR:
            raise ValueError(f"kbar must be <= {MAX_KBAR}, got {self.kbar}")


def mf_map(rho: float, params: MfParams) -> float:
    """Next-step density: strict-majority configurations (fewer than kbar/2
    inactive neighbors) activate with probability 1 - eps, all others with
    probability eps. Binomial coefficients are exact integers."""
    if not (0.0 <= rho <= 1.0):
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    k = params.kbar
    half = k // 2
    major = 0.0
    minor = 0.0
    for i in range(0, half):
        major += math.comb(k, i) * rho ** (k - i) * (1.0 - rho) ** i
    for i in range(half, k + 1):
        minor += math.comb(k, i) * rho ** (k - i) * (1.0 - rho) ** i
    return (1.0 - params.eps) * major + params.eps * minor


def mf_derivative(rho: float, params: MfParams, h: float = 1e-6) -> float:
    """Central finite difference of the map (one-sided at the ends)."""
    lo = max(rho - h, 0.0)
    hi = min(rho + h, 1.0)
    return (mf_map(hi, params) - mf_map(lo, params)) / (hi - lo)


def mf_fixed_points(params: MfParams, grid_n: int = 400) -> list[dict]:
    """All solutions of rho = f(rho) found by a grid scan plus bisection.

    g(0) = -eps < 0 and g(1) = eps > 0 guarantee at least one root. Each
    result carries rho_star and a stability flag |f'(rho*)| < 1.
    """
    if grid_n < 100:
        raise ValueError("grid_n must be >= 100")
    grid = np.linspace(0.0, 1.0, grid_n + 1)
    g = np.array([r - mf_map(r, params) for r in grid])
    roots = []
    for a, b, ga, gb in zip(grid[:-1], grid[1:], g[:-1], g[1:]):
        if ga == 0.0:
            roots.append(float(a))
            continue
        if ga * gb < 0.0:
            lo, hi, glo = a, b, ga
            while hi - lo > 1e-10:
                mid = 0.5 * (lo + hi)
                gm = mid - mf_map(mid, params)
                if gm == 0.0:
                    lo = hi = mid
                elif glo * gm < 0.0:
                    hi = mid
                else:
                    lo, glo = mid, gm
            roots.append(0.5 * (lo + hi))
    if g[-1] == 0.0:
        roots.append(float(grid[-1]))
    return [{"rho_star": r, "stable": abs(mf_derivative(r, params)) < 1.0}
            for r in roots]


def mf_bifurcation_diagram(eps_values, kbar: int, grid_n: int = 400) -> dict:
    """Fixed points swept over eps. Returns the table of (eps, rho_star,
    stable) rows plus the fold location of the high branch, reported where
    the root count drops below three."""
    rows = []
    fold_eps = None
    prev_eps = None
    prev_count = None
    for eps in eps_values:
        params = MfParams(eps=float(eps), kbar=kbar)
        fps = mf_fixed_points(params, grid_n)
        for fp in fps:
            rows.append({"eps": float(eps), "rho_star": fp["rho_star"],
                         "stable": fp["stable"]})
        count = len(fps)
        if prev_count is not None and prev_count >= 3 and count < 3 and fold_eps is None:
            fold_eps = 0.5 * (prev_eps + float(eps))
        prev_eps, prev_count = float(eps), count
    return {"rows": rows, "fold_eps": fold_eps}
