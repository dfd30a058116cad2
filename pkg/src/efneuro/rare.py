"""Effective one-dimensional Fokker-Planck reconstruction along a reaction
coordinate and Kramers mean escape times between metastable coarse states.

The reaction coordinate is the signed projection of the coarse state onto
the node-to-saddle direction; its value is 0 at the coarse node and
-||d_saddle - d_node|| at the saddle (the printed sign convention is kept
verbatim and every downstream integral is orientation-independent).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from .continuation import derive_seed


@dataclass(frozen=True)
class ReactionFrame:
    """Node/saddle pair defining the one-dimensional reaction coordinate."""

    d_node: np.ndarray
    d_saddle: np.ndarray
    unit: np.ndarray = field(init=False)

    def __post_init__(self):
        node = np.asarray(self.d_node, dtype=np.float64)
        saddle = np.asarray(self.d_saddle, dtype=np.float64)
        if node.shape != saddle.shape:
            raise ValueError("node and saddle vectors must have equal shape")
        diff = saddle - node
        nrm = np.linalg.norm(diff)
        if nrm == 0.0:
            raise ValueError("node and saddle coincide")
        object.__setattr__(self, "d_node", node)
        object.__setattr__(self, "d_saddle", saddle)
        object.__setattr__(self, "unit", diff / nrm)

    @property
    def saddle_psi(self) -> float:
        """Reaction-coordinate value of the saddle (negative by convention)."""
        return -float(np.linalg.norm(self.d_saddle - self.d_node))


def reaction_coordinate(d: np.ndarray, frame: ReactionFrame) -> float:
    """psi = (d_node - d) . unit; zero at the node."""
    d = np.asarray(d, dtype=np.float64)
    if d.shape != frame.d_node.shape:
        raise ValueError(f"state shape {d.shape} does not match frame "
                         f"{frame.d_node.shape}")
    return float((frame.d_node - d) @ frame.unit)


def embed(psi: float, frame: ReactionFrame) -> np.ndarray:
    """Right inverse of reaction_coordinate on the node-saddle line:
    d = d_node - psi * unit (admissibility clipping happens at lift time)."""
    return frame.d_node - psi * frame.unit


def default_psi_grid(frame: ReactionFrame, n: int = 41, margin: float = 0.2) -> np.ndarray:
    """Ascending grid spanning the node-saddle segment extended by `margin`
    on both ends, so the stable well around the node is interior."""
    span = -frame.saddle_psi
    return np.linspace(frame.saddle_psi - margin * span, margin * span, n)


@dataclass
class FokkerPlanckProfile:
    """Gridded drift u(psi), diffusion D(psi) and free energy betaG(psi)."""

    psi_grid: np.ndarray
    drift: np.ndarray
    diffusion: np.ndarray
    free_energy: np.ndarray | None
    n_realizations: int
    tau: int
    valid: np.ndarray = None  # per-point flag: diffusion estimate positive

    def __post_init__(self):
        if self.valid is None:
            self.valid = np.ones(len(self.psi_grid), dtype=bool)

    @property
    def complete(self) -> bool:
        return bool(self.valid.all())


def make_coarse_sampler(timestepper, frame: ReactionFrame, param_value: float):
    """Increment sampler backed by the ensemble coarse timestepper: lift at
    embed(psi), evolve tau steps, restrict each realization individually and
    project back to the reaction coordinate."""
    def sampler(psi: float, n_real: int, tau: int, seed) -> np.ndarray:
        if timestepper.horizon != tau or timestepper.n_copies != n_real:
            raise ValueError("timestepper horizon/n_copies do not match the "
                             "requested tau/n_real")
        d0 = embed(psi, frame)
        per = timestepper.per_realization_densities(d0, param_value, seed)
        return (frame.d_node[:, None] - per).T @ frame.unit
    return sampler


def estimate_drift_diffusion(sampler, psi_grid: np.ndarray, n_real: int,
                             tau: int, master_seed) -> FokkerPlanckProfile:
    """First two conditional moments of the coordinate increment over a
    horizon of tau steps, estimated independently at every grid point.

    drift = mean(delta psi) / tau; diffusion = central second moment of
    delta psi / (2 tau) (the central moment removes the O(tau^2) drift bias).
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if n_real < 100:
        raise ValueError("need n_real >= 100")
    psi_grid = np.asarray(psi_grid, dtype=np.float64)
    if np.any(np.diff(psi_grid) <= 0.0):
        raise ValueError("psi_grid must be strictly ascending")
    drift = np.empty_like(psi_grid)
    diffusion = np.empty_like(psi_grid)
    valid = np.ones(len(psi_grid), dtype=bool)
    for g, psi in enumerate(psi_grid):
        endpoints = np.asarray(sampler(float(psi), n_real, tau,
                                       derive_seed(master_seed, g)))
        delta = endpoints - psi
        drift[g] = delta.mean() / tau
        diffusion[g] = delta.var(ddof=1) / (2.0 * tau)
        if diffusion[g] <= 0.0:
            valid[g] = False
    return FokkerPlanckProfile(psi_grid=psi_grid, drift=drift,
                               diffusion=diffusion, free_energy=None,
                               n_realizations=n_real, tau=tau, valid=valid)


def free_energy(profile: FokkerPlanckProfile) -> FokkerPlanckProfile:
    """betaG(psi) = -integral of u/D from the grid origin + ln D, shifted so
    min betaG = 0. (beta is absorbed; the additive constant is irrelevant.)"""
    if not profile.complete:
        bad = profile.psi_grid[~profile.valid]
        raise ValueError(f"diffusion estimate non-positive at psi={bad.tolist()}; "
                         "profile incomplete")
    ratio = profile.drift / profile.diffusion
    integral = cumulative_trapezoid(ratio, profile.psi_grid, initial=0.0)
    beta_g = -integral + np.log(profile.diffusion)
    beta_g -= beta_g.min()
    profile.free_energy = beta_g
    return profile


@dataclass(frozen=True)
class EscapeTimeResult:
    tau_escape: float
    barrier: float
    barrier_integral: float
    well_integral: float
    psi_stable: float
    psi_unstable: float
    low_barrier: bool            # barrier < 1: Kramers assumption shaky
    boundary_leak: bool          # well integrand not negligible at the grid edge

    def to_dict(self) -> dict:
        return {
            "tau_escape": self.tau_escape,
            "barrier": self.barrier,
            "barrier_integral": self.barrier_integral,
            "well_integral": self.well_integral,
            "psi_stable": self.psi_stable,
            "psi_unstable": self.psi_unstable,
            "low_barrier": self.low_barrier,
            "boundary_leak": self.boundary_leak,
        }


def _trapz_between(x: np.ndarray, y: np.ndarray, lo: float, hi: float) -> float:
    """Trapezoid integral of tabulated y(x) over [lo, hi] with interpolated
    endpoints."""
    if hi < lo:
        lo, hi = hi, lo
    inside = (x > lo) & (x < hi)
    xs = np.concatenate([[lo], x[inside], [hi]])
    ys = np.concatenate([[np.interp(lo, x, y)], y[inside], [np.interp(hi, x, y)]])
    return float(np.trapezoid(ys, xs))


def mean_escape_time(profile: FokkerPlanckProfile, psi_stable: float,
                     psi_unstable: float) -> EscapeTimeResult:
    """Kramers estimate: (integral of e^{betaG} between the states) times
    (integral of e^{-betaG}/D over the stable well up to the barrier top).

    The infinite integration limit is truncated at the sampled grid edge;
    boundary_leak flags a well integrand above 1e-3 of its peak there.
    """
    if profile.free_energy is None:
        raise ValueError("free energy not filled; call free_energy() first")
    grid = profile.psi_grid
    if not (grid[0] <= psi_stable <= grid[-1]) or not (grid[0] <= psi_unstable <= grid[-1]):
        raise ValueError("psi_stable and psi_unstable must lie inside the grid")
    beta_g = profile.free_energy
    g_stable = float(np.interp(psi_stable, grid, beta_g))
    g_unstable = float(np.interp(psi_unstable, grid, beta_g))
    barrier = g_unstable - g_stable
    barrier_integrand = np.exp(beta_g)
    well_integrand = np.exp(-beta_g) / profile.diffusion
    i_barrier = _trapz_between(grid, barrier_integrand, psi_stable, psi_unstable)
    # the well lies on the stable side of the barrier top
    if psi_stable >= psi_unstable:
        well_lo, well_hi, edge = psi_unstable, float(grid[-1]), -1
    else:
        well_lo, well_hi, edge = float(grid[0]), psi_unstable, 0
    i_well = _trapz_between(grid, well_integrand, well_lo, well_hi)
    leak = bool(well_integrand[edge] > 1e-3 * well_integrand.max())
    return EscapeTimeResult(tau_escape=i_barrier * i_well, barrier=barrier,
                            barrier_integral=i_barrier, well_integral=i_well,
                            psi_stable=psi_stable, psi_unstable=psi_unstable,
                            low_barrier=bool(barrier < 1.0), boundary_leak=leak)


@dataclass(frozen=True)
class GaussianityReport:
    mean: float
    std: float
    excess_kurtosis: float
    p_value: float
    n_samples: int
    n_bins: int
    degenerate: bool

    @property
    def gaussian_plausible(self) -> bool:
        return (not self.degenerate) and self.p_value > 0.01

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std,
                "excess_kurtosis": self.excess_kurtosis,
                "p_value": self.p_value, "n_samples": self.n_samples,
                "n_bins": self.n_bins, "degenerate": self.degenerate}


def noise_gaussianity(series: np.ndarray, n_bins: int = 20) -> GaussianityReport:
    """Sample moments of a plateau time series plus a chi-square
    goodness-of-fit against the fitted Gaussian on equal-probability bins."""
    series = np.asarray(series, dtype=np.float64)
    n = len(series)
    if n < 1000:
        raise ValueError(f"need at least 1000 samples, got {n}")
    n_bins = max(10, n_bins)
    mean = float(series.mean())
    std = float(series.std(ddof=1))
    if std == 0.0:
        return GaussianityReport(mean=mean, std=0.0, excess_kurtosis=float("nan"),
                                 p_value=0.0, n_samples=n, n_bins=n_bins,
                                 degenerate=True)
    kurt = float(stats.kurtosis(series, fisher=True, bias=False))
    quantiles = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    edges = stats.norm.ppf(quantiles, loc=mean, scale=std)
    observed = np.bincount(np.searchsorted(edges, series), minlength=n_bins)
    expected = n / n_bins
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    dof = n_bins - 3  # mean and std were fitted
    p_value = float(stats.chi2.sf(chi2, dof))
    return GaussianityReport(mean=mean, std=std, excess_kurtosis=kurt,
                             p_value=p_value, n_samples=n, n_bins=n_bins,
                             degenerate=False)
