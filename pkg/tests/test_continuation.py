import math

import numpy as np
import pytest

from efneuro import coarse, graph
from efneuro.continuation import (Branch, BranchPoint, CorrectorTols,
                                  NewtonConvergenceError, classify_stability,
                                  detect_bifurcations, fd_jacobian_vector,
                                  make_jacobian_operator, newton_corrector,
                                  solve_fixed_point, trace_branch,
                                  zero_branch_scan)

TIGHT = CorrectorTols(newton_tol=1e-12, gmres_tol=1e-12, fd_eps=1e-7,
                      param_fd_eps=1e-7)


def phi_fold(u, p, seed=None):
    """Fixed-point residual u - phi = u^2 + p: fold at p = 0."""
    return u - (u ** 2 + p)


@pytest.fixture(scope="module")
def net_small():
    return graph.generate_er(2000, 0.004, seed=7)


@pytest.fixture(scope="module")
def phi_small(net_small):
    layout = coarse.layout_from_network(net_small)
    return coarse.CoarseTimestepper(layout, param="eps", net=net_small,
                                    n_copies=300, horizon=5)


def test_fd_jacobian_identity_map():
    phi_id = lambda u: u
    q = np.array([0.6, -0.8])
    out = fd_jacobian_vector(phi_id, np.array([0.3, 0.4]), q, 1e-3)
    assert np.allclose(out, q, atol=1e-12)


def test_fd_jacobian_linear_map_exact():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((5, 5))
    phi_lin = lambda u: a @ u
    u = rng.standard_normal(5)
    q = rng.standard_normal(5)
    q /= np.linalg.norm(q)
    out = fd_jacobian_vector(phi_lin, u, q, 1e-4)
    assert np.abs(out - a @ q).max() < 1e-9


def test_fd_jacobian_uses_cached_base():
    calls = []
    phi_c = lambda u: (calls.append(1), 2.0 * u)[1]
    base = np.array([2.0])
    out = fd_jacobian_vector(phi_c, np.array([1.0]), np.array([1.0]), 1e-6,
                             base=base)
    assert len(calls) == 1
    assert out[0] == pytest.approx(2.0, rel=1e-9)


@pytest.mark.slow
def test_fd_jacobian_stochastic_step_size_robust(phi_small):
    """Jacobian-vector products at two finite-difference steps agree within
    the replication noise of the quotient itself."""
    f = phi_small.layout.class_fractions
    u = 0.55 * f
    q = np.zeros(phi_small.dimension)
    q[int(np.argmax(f))] = 1.0
    eps_val = 0.15

    def jv(fd, seed):
        bound = lambda v: phi_small(v, eps_val, seed)
        return fd_jacobian_vector(bound, u, q, fd)

    j1 = jv(5e-3, 42)
    j2 = jv(1e-2, 42)
    reps = [jv(1e-2, 500 + r) for r in range(6)]
    noise = np.std(reps, axis=0, ddof=1)
    assert np.all(np.abs(j1 - j2) < 4 * noise + 0.02)


def test_split_operator_matches_plain_in_interior():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((4, 4)) * 0.3
    phi_lin = lambda u, p, seed: a @ u
    u = np.full(4, 10.0)  # far inside the box
    op_plain, _ = make_jacobian_operator(phi_lin, u, 0.0, 1e-6, 0)
    op_split, _ = make_jacobian_operator(phi_lin, u, 0.0, 1e-6, 0,
                                         lower=np.zeros(4))
    q = rng.standard_normal(4)
    assert np.allclose(op_plain(q), op_split(q), atol=1e-8)
    assert np.allclose(op_plain(q), a @ q, atol=1e-8)


def test_split_operator_exact_at_zero_for_linear_map():
    rng = np.random.default_rng(5)
    a = np.abs(rng.standard_normal((4, 4))) * 0.4
    # clip below zero as the lift would
    phi_clip = lambda u, p, seed: a @ np.maximum(u, 0.0)
    u0 = np.zeros(4)
    op, _ = make_jacobian_operator(phi_clip, u0, 0.0, 1e-4, 0, lower=u0)
    q = rng.standard_normal(4)
    assert np.allclose(op(q), a @ q, atol=1e-10)


def test_solve_fixed_point_contraction_two_steps():
    phi_half = lambda u, p, seed: 0.5 * u
    pt = solve_fixed_point(phi_half, np.array([0.37]), 0.0, TIGHT)
    assert pt.newton_iters <= 2
    assert abs(pt.u[0]) < 1e-12


def test_solve_fixed_point_raises_on_stall():
    phi_runaway = lambda u, p, seed: u + 1.0
    with pytest.raises(NewtonConvergenceError):
        solve_fixed_point(phi_runaway, np.array([0.0]), 0.0,
                          CorrectorTols(newton_tol=1e-10, max_newton=3))


def test_zero_is_exact_fixed_point_of_coarse_map(phi_small):
    tols = CorrectorTols(newton_tol=1e-9)
    pt = solve_fixed_point(phi_small, np.zeros(phi_small.dimension), 0.12,
                           tols, lower=np.zeros(phi_small.dimension))
    assert pt.newton_iters == 0
    assert pt.residual_norm == 0.0


def test_corrector_satisfies_arclength_row():
    pt0 = solve_fixed_point(phi_fold, np.array([0.5]), -0.25, TIGHT)
    u1 = math.sqrt(0.24)
    pt1 = solve_fixed_point(phi_fold, np.array([u1]), -0.24, TIGHT)
    du = pt1.u - pt0.u
    dp = pt1.param - pt0.param
    sec = math.hypot(np.linalg.norm(du), dp)
    a, beta = du / sec, dp / sec
    ds = 5e-3
    pt2 = newton_corrector(phi_fold, pt1.u + ds * a, pt1.param + ds * beta,
                           pt1.u, pt1.param, (a, beta), ds, TIGHT)
    arc = float(a @ (pt2.u - pt1.u) + beta * (pt2.param - pt1.param))
    assert abs(arc - ds) < 1e-8
    assert abs(pt2.u[0] ** 2 + pt2.param) < 1e-10


@pytest.fixture(scope="module")
def fold_branch():
    pt0 = solve_fixed_point(phi_fold, np.array([0.5]), -0.25, TIGHT)
    pt1 = solve_fixed_point(phi_fold, np.array([math.sqrt(0.24)]), -0.24, TIGHT)
    return trace_branch(phi_fold, pt0, pt1, ds0=5e-3, n_points=220, tols=TIGHT,
                        ds_min=1e-9, ds_max=5e-3)


def test_trace_through_fold_recovers_both_halves(fold_branch):
    u_vals = np.array([p.u[0] for p in fold_branch.points])
    assert u_vals.max() > 0.4 and u_vals.min() < -0.4
    assert not fold_branch.aborted
    # every point on the analytic branch u^2 = -p
    for pt in fold_branch.points:
        assert abs(pt.u[0] ** 2 + pt.param) < 1e-9


def test_arclength_consistency_along_branch(fold_branch):
    pts = fold_branch.points
    for i in range(2, len(pts)):
        a, beta = pts[i].tangent
        arc = float(a @ (pts[i].u - pts[i - 1].u)
                    + beta * (pts[i].param - pts[i - 1].param))
        assert abs(arc - fold_branch.step_sizes[i]) < 1e-8


def test_fold_detection_to_1e6(fold_branch):
    events = detect_bifurcations(fold_branch)
    folds = [e for e in events if e.kind == "fold"]
    assert len(folds) == 1
    assert abs(folds[0].param_estimate) < 1e-6


def test_stability_flips_exactly_once_across_fold(fold_branch):
    flags = []
    for pt in fold_branch.points:
        flags.append(classify_stability(phi_fold, pt, m=1, n_want=1,
                                        fd_eps=1e-7).stable)
    flips = sum(1 for a, b in zip(flags[:-1], flags[1:]) if a != b)
    assert flips == 1


def test_classify_stability_linear_contraction():
    phi_half = lambda u, p, seed: 0.5 * u
    pt = BranchPoint(u=np.array([0.0]), param=0.0, tangent=None,
                     residual_norm=0.0)
    pt = classify_stability(phi_half, pt, m=1, n_want=1, fd_eps=1e-7)
    assert pt.leading_eigs[0] == pytest.approx(0.5, abs=1e-8)
    assert pt.stable


def test_detect_bifurcations_empty_on_monotone_stable_branch():
    pts = [BranchPoint(u=np.array([x]), param=x, tangent=None,
                       residual_norm=0.0, leading_eigs=np.array([0.5 + 0j]),
                       stable=True) for x in np.linspace(0, 1, 8)]
    branch = Branch(points=pts, step_sizes=[0.1] * 8)
    assert detect_bifurcations(branch) == []


def test_detect_transcritical_candidate_from_eigendata():
    params = np.linspace(0.0, 1.0, 9)
    pts = [BranchPoint(u=np.zeros(2), param=float(p), tangent=None,
                       residual_norm=0.0,
                       leading_eigs=np.array([0.6 + p + 0j]), stable=p < 0.4)
           for p in params]
    branch = Branch(points=pts, step_sizes=[0.1] * len(pts))
    events = detect_bifurcations(branch)
    cands = [e for e in events if e.kind == "transcritical-candidate"]
    assert len(cands) == 1
    assert cands[0].param_estimate == pytest.approx(0.4, abs=1e-9)


def test_corrector_rejects_branch_jump():
    """A map with two intersecting solution families: the corrector must not
    accept a converged point far from the predictor."""
    # residual (u - p)(u + p): branches u = p and u = -p cross at 0
    phi_x = lambda u, p, seed: u - (u - p) * (u + p)
    tols = CorrectorTols(newton_tol=1e-12, gmres_tol=1e-12, fd_eps=1e-7,
                         param_fd_eps=1e-7, max_newton=40)
    a = np.array([1.0 / math.sqrt(2.0)])
    beta = 1.0 / math.sqrt(2.0)
    # predictor placed near the other branch
    with pytest.raises(NewtonConvergenceError):
        newton_corrector(phi_x, np.array([-0.996]), 1.0, np.array([1.0]), 1.0,
                         (a, beta), 1e-3, tols)


@pytest.mark.slow
def test_newton_matches_temporal_plateau():
    """Converged high-density equilibrium agrees with the plateau of a long
    temporal run within 0.02 in density norm."""
    from efneuro import micro
    net = graph.generate_er(10000, 0.0008, seed=1)
    layout = coarse.layout_from_network(net)
    phi = coarse.CoarseTimestepper(layout, param="eps", net=net,
                                   n_copies=500, horizon=5)
    eps_val = 0.15
    rng = np.random.default_rng(3)
    state = micro.new_state(net, 0.9, rng)
    params = micro.SimParams(eps_val)
    dens = []
    for t in range(600):
        state = micro.step(net, state, params, rng)
        if t >= 400:
            dens.append(micro.total_density(state))
    plateau = float(np.mean(dens))
    guess = plateau * layout.class_fractions
    pt = solve_fixed_point(phi, guess, eps_val, CorrectorTols(),
                           lower=np.zeros(phi.dimension))
    assert abs(np.abs(pt.u).sum() - plateau) < 0.02


@pytest.mark.slow
def test_zero_branch_scan_orders_stability(phi_small):
    """All-off state stable at small eps, unstable at large eps, with the
    eigenvalue crossing detected in between."""
    scale = phi_small.fd_scale()
    branch = zero_branch_scan(phi_small, [0.05, 0.09, 0.13, 0.17], m=6,
                              n_want=2, seed=3, scale=scale)
    stables = [pt.stable for pt in branch.points]
    assert stables[0] and not stables[-1]
    events = detect_bifurcations(branch)
    cands = [e for e in events if e.kind == "transcritical-candidate"]
    assert len(cands) == 1
    assert 0.05 < cands[0].param_estimate < 0.17
