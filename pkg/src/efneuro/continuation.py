"""Pseudo-arclength continuation of coarse equilibria with matrix-free
Newton-GMRES, plus stability classification and bifurcation detection.

The map phi(u, param, seed) is treated as a black box; Jacobian action is
estimated by forward differences of two evaluations sharing the same master
seed (common random numbers), without which the stochastic noise would
swamp the difference quotient at realistic ensemble sizes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .krylov import LinearOperator, gmres, leading_eigenvalues


def derive_seed(base, *key) -> int:
    """Deterministic child seed from a base seed and an integer key path."""
    ss = np.random.SeedSequence(entropy=base,
                                spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class CorrectorTols:
    """Tolerances of the Newton-GMRES corrector.

    newton_tol=None selects max(5e-4, 3 * phi.noise_floor(u)), tying the
    stopping criterion to the ensemble fluctuation scale; deterministic
    surrogates must pass an explicit tolerance.
    """

    newton_tol: float | None = None
    gmres_tol: float = 1e-3
    fd_eps: float = 1e-2
    param_fd_eps: float = 1e-3
    max_newton: int = 8


class NewtonConvergenceError(RuntimeError):
    def __init__(self, message: str, u: np.ndarray, param: float, residual: float):
        super().__init__(message)
        self.u = u
        self.param = param
        self.residual = residual


@dataclass
class BranchPoint:
    """A converged coarse equilibrium: u - phi(u, param) = 0 to tolerance."""

    u: np.ndarray
    param: float
    tangent: tuple[np.ndarray, float] | None
    residual_norm: float
    newton_iters: int = 0
    leading_eigs: np.ndarray | None = None
    stable: bool | None = None

    @property
    def max_abs_eig(self) -> float | None:
        if self.leading_eigs is None or len(self.leading_eigs) == 0:
            return None
        return float(np.abs(self.leading_eigs).max())


@dataclass
class Branch:
    points: list[BranchPoint]
    param_name: str = "param"
    step_sizes: list[float] = field(default_factory=list)
    aborted: bool = False

    def params(self) -> np.ndarray:
        return np.array([p.param for p in self.points])


def fd_jacobian_vector(phi_fixed_seed, u: np.ndarray, q: np.ndarray,
                       fd_eps: float, base: np.ndarray | None = None) -> np.ndarray:
    """Directional derivative (phi(u + fd_eps q) - phi(u)) / fd_eps.

    phi_fixed_seed must evaluate at one fixed master seed so both calls share
    random numbers; `base` short-circuits the phi(u) evaluation when cached.
    """
    if fd_eps <= 0.0:
        raise ValueError("fd_eps must be positive")
    if base is None:
        base = phi_fixed_seed(u)
    return (phi_fixed_seed(u + fd_eps * q) - base) / fd_eps


def make_jacobian_operator(phi, u: np.ndarray, param: float, fd_eps: float,
                           seed, base: np.ndarray | None = None,
                           lower: np.ndarray | None = None):
    """LinearOperator approximating q -> (dphi/du) q at (u, param).

    Near the lower admissibility boundary (components of u at zero, where
    lifting would clip a negative perturbation) the direction is split into
    its positive and negative parts and the derivative is formed from two
    feasible perturbations: [phi(u + eps q+) - phi(u + eps q-)] / eps.
    Returns (operator, base) with base = phi(u, param, seed).
    """
    def bound(v):
        return np.asarray(phi(v, param, seed), dtype=np.float64)

    if base is None:
        base = bound(u)

    def apply(q):
        if lower is not None:
            qm = np.minimum(q, 0.0)
            if np.any(u + fd_eps * qm < lower - 1e-15):
                qp = np.maximum(q, 0.0)
                hi = bound(u + fd_eps * qp) if qp.any() else base
                lo = bound(u - fd_eps * qm) if qm.any() else base
                return (hi - lo) / fd_eps
        return (bound(u + fd_eps * q) - base) / fd_eps

    return LinearOperator(dimension=len(u), apply=apply), base


def _resolve_newton_tol(tols: CorrectorTols, phi, u: np.ndarray) -> float:
    if tols.newton_tol is not None:
        return tols.newton_tol
    floor = getattr(phi, "noise_floor", None)
    if floor is None:
        raise ValueError("newton_tol=None requires phi to expose noise_floor()")
    return max(5e-4, 3.0 * floor(u))


def solve_fixed_point(phi, u_guess: np.ndarray, param: float,
                      tols: CorrectorTols, seed=0,
                      lower: np.ndarray | None = None) -> BranchPoint:
    """Plain Newton-GMRES for u = phi(u, param) at fixed parameter."""
    u = np.asarray(u_guess, dtype=np.float64).copy()
    ntol = _resolve_newton_tol(tols, phi, u)
    dim = len(u)
    for it in range(tols.max_newton + 1):
        seed_it = derive_seed(seed, it)
        op, base = make_jacobian_operator(phi, u, param, tols.fd_eps, seed_it,
                                          lower=lower)
        r1 = u - base
        rnorm = float(np.linalg.norm(r1))
        if rnorm <= ntol:
            return BranchPoint(u=u, param=param, tangent=None,
                               residual_norm=rnorm, newton_iters=it)
        if it == tols.max_newton:
            raise NewtonConvergenceError(
                f"fixed-point Newton stalled at residual {rnorm:.3e} "
                f"(tol {ntol:.3e})", u, param, rnorm)
        aug = LinearOperator(dim, lambda q, op=op: q - op(q))
        sol = gmres(aug, -r1, tol=tols.gmres_tol, max_iter=dim + 2)
        u = u + sol.x
    raise AssertionError("unreachable")


def newton_corrector(phi, guess_u: np.ndarray, guess_param: float,
                     prev_u: np.ndarray, prev_param: float,
                     tangent: tuple[np.ndarray, float], ds: float,
                     tols: CorrectorTols, seed=0,
                     lower: np.ndarray | None = None) -> BranchPoint:
    """One corrector solve of the fixed-point equation augmented with the
    linearized arclength condition a.(u - u0) + beta (p - p0) - ds = 0.

    Newton updates are damped to a few arclength steps, and a solution that
    converges far from the predictor is rejected: both guard against the
    corrector tunnelling onto a different solution branch (the all-off state
    solves the fixed-point equation at every parameter value). Raises
    NewtonConvergenceError on failure; the caller halves ds and retries.
    """
    a, beta = tangent
    a = np.asarray(a, dtype=np.float64)
    u = np.asarray(guess_u, dtype=np.float64).copy()
    p = float(guess_param)
    ntol = _resolve_newton_tol(tols, phi, u)
    leash = max(3.0 * abs(ds), 10.0 * ntol)
    dim = len(u)
    for it in range(tols.max_newton + 1):
        seed_it = derive_seed(seed, it)
        op, base = make_jacobian_operator(phi, u, p, tols.fd_eps, seed_it,
                                          lower=lower)
        r1 = u - base
        r2 = float(a @ (u - prev_u) + beta * (p - prev_param) - ds)
        rnorm = math.hypot(float(np.linalg.norm(r1)), r2)
        if rnorm <= ntol:
            drift = math.hypot(float(np.linalg.norm(u - guess_u)),
                               p - guess_param)
            if drift > leash:
                raise NewtonConvergenceError(
                    f"corrector converged {drift:.3e} away from the predictor "
                    f"(leash {leash:.3e}): suspected branch jump", u, p, rnorm)
            return BranchPoint(u=u, param=p, tangent=(a, beta),
                               residual_norm=rnorm, newton_iters=it)
        if it == tols.max_newton:
            raise NewtonConvergenceError(
                f"corrector stalled at residual {rnorm:.3e} (tol {ntol:.3e}, "
                f"ds {ds:.3e})", u, p, rnorm)
        dphi_dp = (np.asarray(phi(u, p + tols.param_fd_eps, seed_it), dtype=np.float64)
                   - base) / tols.param_fd_eps

        def aug_apply(w, op=op, dphi_dp=dphi_dp):
            q, qp = w[:dim], w[dim]
            top = q - op(q) - dphi_dp * qp
            bottom = a @ q + beta * qp
            return np.concatenate([top, [bottom]])

        aug = LinearOperator(dim + 1, aug_apply)
        rhs = -np.concatenate([r1, [r2]])
        sol = gmres(aug, rhs, tol=tols.gmres_tol, max_iter=dim + 2)
        step_norm = float(np.linalg.norm(sol.x))
        damp = min(1.0, leash / step_norm) if step_norm > 0.0 else 1.0
        u = u + damp * sol.x[:dim]
        p = p + damp * float(sol.x[dim])
    raise AssertionError("unreachable")


def trace_branch(phi, point0: BranchPoint, point1: BranchPoint, ds0: float,
                 n_points: int, tols: CorrectorTols, param_name: str = "param",
                 ds_min: float = 1e-6, ds_max: float = math.inf, seed=0,
                 lower: np.ndarray | None = None, grow: float = 1.3,
                 grow_threshold: int = 3,
                 param_range: tuple[float, float] | None = None) -> Branch:
    """Trace a branch from two converged seed solutions via secant predictor
    and arclength corrector, appending up to n_points new points.

    The step size halves after a failed correction and grows by `grow` after
    an easy one (<= grow_threshold Newton steps), clamped to [ds_min, ds_max].
    Folds are traversed; tracing stops early only on step-size underflow
    (Branch.aborted) or when the parameter leaves param_range.
    """
    branch = Branch(points=[point0, point1], param_name=param_name,
                    step_sizes=[0.0, 0.0])
    ds = ds0
    attempt = 0
    while len(branch.points) - 2 < n_points:
        prev, last = branch.points[-2], branch.points[-1]
        du = last.u - prev.u
        dp = last.param - prev.param
        sec = math.hypot(float(np.linalg.norm(du)), dp)
        if sec == 0.0:
            branch.aborted = True
            break
        a = du / sec
        beta = dp / sec
        pred_u = last.u + ds * a
        pred_p = last.param + ds * beta
        attempt += 1
        try:
            pt = newton_corrector(phi, pred_u, pred_p, last.u, last.param,
                                  (a, beta), ds, tols,
                                  seed=derive_seed(seed, attempt), lower=lower)
        except NewtonConvergenceError:
            ds *= 0.5
            if ds < ds_min:
                branch.aborted = True
                break
            continue
        branch.points.append(pt)
        branch.step_sizes.append(ds)
        if pt.newton_iters <= grow_threshold:
            ds = min(ds * grow, ds_max)
        if param_range is not None and not (param_range[0] <= pt.param <= param_range[1]):
            break
    return branch


def classify_stability(phi, point: BranchPoint, m: int = 10, n_want: int = 6,
                       fd_eps: float = 1e-2, seed=0,
                       lower: np.ndarray | None = None,
                       scale: np.ndarray | None = None) -> BranchPoint:
    """Fill leading_eigs with the n_want largest-magnitude eigenvalues of
    dphi/du at the converged point; stable iff max |lambda| < 1.

    `scale` applies a diagonal similarity D^-1 J D (same spectrum) with D
    set from the degree-class fractions: perturbation directions then respect
    the admissible box of every class, without which the finite difference
    saturates the small tail classes and biases the Ritz values.
    """
    op, _ = make_jacobian_operator(phi, point.u, point.param, fd_eps,
                                   derive_seed(seed, 101), lower=lower)
    if scale is not None:
        raw = op.apply
        op = LinearOperator(op.dimension, lambda z: raw(scale * z) / scale)
    m_eff = min(m, len(point.u))
    eigs = leading_eigenvalues(op, m=m_eff, n_want=min(n_want, m_eff),
                               seed=derive_seed(seed, 7))
    return replace(point, leading_eigs=eigs,
                   stable=bool(np.abs(eigs).max() < 1.0))


@dataclass(frozen=True)
class BifurcationEvent:
    kind: str                      # "fold" or "transcritical-candidate"
    index: int                     # point index the event is anchored at
    param_estimate: float
    bracket: tuple[float, float]


def _leading_real(point: BranchPoint) -> float | None:
    """Real part of the largest-magnitude eigenvalue if essentially real."""
    if point.leading_eigs is None or len(point.leading_eigs) == 0:
        return None
    lam = point.leading_eigs[int(np.argmax(np.abs(point.leading_eigs)))]
    if abs(lam.imag) > 1e-6 * (1.0 + abs(lam.real)):
        return None
    return float(lam.real)


def detect_bifurcations(branch: Branch) -> list[BifurcationEvent]:
    """Folds from a reversal of dparam/ds (refined by a local quadratic fit
    of param against arclength); transcritical candidates where the leading
    real eigenvalue crosses +1 while the parameter keeps advancing."""
    pts = branch.points
    if len(pts) < 3:
        return []
    params = branch.params()
    dp = np.diff(params)
    events: list[BifurcationEvent] = []
    fold_indices = set()
    for i in range(1, len(dp)):
        if dp[i - 1] == 0.0 or dp[i] == 0.0 or dp[i - 1] * dp[i] > 0.0:
            continue
        # reversal at point i: fit param(s) through points i-1, i, i+1
        s1 = math.hypot(float(np.linalg.norm(pts[i].u - pts[i - 1].u)), dp[i - 1])
        s2 = s1 + math.hypot(float(np.linalg.norm(pts[i + 1].u - pts[i].u)), dp[i])
        sv = np.array([0.0, s1, s2])
        pv = params[i - 1:i + 2]
        coef = np.polyfit(sv, pv, 2)
        estimate = float(params[i])
        if coef[0] != 0.0:
            s_star = -coef[1] / (2.0 * coef[0])
            if -0.5 * s1 <= s_star <= 1.5 * s2:
                estimate = float(np.polyval(coef, s_star))
        lo, hi = sorted((float(params[i - 1]), float(params[i + 1])))
        events.append(BifurcationEvent(kind="fold", index=i,
                                       param_estimate=estimate, bracket=(lo, hi)))
        fold_indices.update((i - 1, i, i + 1))
    lead = [_leading_real(pt) for pt in pts]
    for i in range(len(pts) - 1):
        if lead[i] is None or lead[i + 1] is None:
            continue
        if i in fold_indices or (i + 1) in fold_indices:
            continue
        gi, gj = lead[i] - 1.0, lead[i + 1] - 1.0
        if gi == 0.0 or gi * gj >= 0.0:
            continue
        frac = gi / (gi - gj)
        estimate = float(params[i] + frac * (params[i + 1] - params[i]))
        lo, hi = sorted((float(params[i]), float(params[i + 1])))
        events.append(BifurcationEvent(kind="transcritical-candidate", index=i,
                                       param_estimate=estimate, bracket=(lo, hi)))
    events.sort(key=lambda e: e.index)
    return events


def zero_branch_scan(phi, param_values, m: int = 10, n_want: int = 6,
                     fd_eps: float = 1e-2, seed=0, param_name: str = "param",
                     dimension: int | None = None,
                     scale: np.ndarray | None = None) -> Branch:
    """Stability of the exact all-off equilibrium u = 0 over a parameter
    grid. The all-off state is absorbing, so u = 0 solves the fixed-point
    equation with zero residual at every parameter value."""
    dim = dimension if dimension is not None else phi.dimension
    zero = np.zeros(dim)
    lower = np.zeros(dim)
    points = []
    for pv in param_values:
        pt = BranchPoint(u=zero.copy(), param=float(pv), tangent=None,
                         residual_norm=0.0)
        points.append(classify_stability(phi, pt, m=m, n_want=n_want,
                                         fd_eps=fd_eps, seed=seed, lower=lower,
                                         scale=scale))
    return Branch(points=points, param_name=param_name,
                  step_sizes=[0.0] * len(points))


def refine_zero_branch_crossing(phi, param_lo: float, param_hi: float,
                                tol_param: float, m: int = 8, fd_eps: float = 1e-2,
                                seed=0, dimension: int | None = None,
                                scale: np.ndarray | None = None) -> float:
    """Bisect the parameter at which the leading eigenvalue of the all-off
    state crosses magnitude one. The same seed is reused at every parameter
    so the eigenvalue estimate varies smoothly during the bisection."""
    dim = dimension if dimension is not None else phi.dimension
    zero = np.zeros(dim)
    lower = np.zeros(dim)

    def lam(pv: float) -> float:
        pt = BranchPoint(u=zero.copy(), param=pv, tangent=None, residual_norm=0.0)
        pt = classify_stability(phi, pt, m=m, n_want=1, fd_eps=fd_eps,
                                seed=seed, lower=lower, scale=scale)
        return pt.max_abs_eig - 1.0

    glo, ghi = lam(param_lo), lam(param_hi)
    if glo == 0.0:
        return param_lo
    if ghi == 0.0:
        return param_hi
    if glo * ghi > 0.0:
        raise ValueError(f"no eigenvalue crossing bracketed in "
                         f"[{param_lo}, {param_hi}] (values {glo + 1:.4f}, {ghi + 1:.4f})")
    lo, hi = param_lo, param_hi
    while hi - lo > tol_param:
        mid = 0.5 * (lo + hi)
        gm = lam(mid)
        if gm == 0.0:
            return mid
        if glo * gm < 0.0:
            hi = mid
        else:
            lo, glo = mid, gm
    return 0.5 * (lo + hi)
