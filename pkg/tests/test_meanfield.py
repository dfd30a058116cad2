import itertools

import numpy as np
import pytest

from efneuro.meanfield import (MfParams, mf_bifurcation_diagram, mf_derivative,
                               mf_fixed_points, mf_map)


def enumeration_oracle(rho, eps, k):
    """Brute-force sum over all 2^k neighbor configurations."""
    total = 0.0
    for bits in itertools.product((0, 1), repeat=k):
        active = sum(bits)
        weight = rho ** active * (1 - rho) ** (k - active)
        total += weight * ((1 - eps) if active > k / 2 else eps)
    return total


def test_params_validation():
    with pytest.raises(ValueError):
        MfParams(eps=0.1, kbar=7)        # odd
    with pytest.raises(ValueError):
        MfParams(eps=0.1, kbar=66)       # beyond exact-binomial guard
    with pytest.raises(ValueError):
        MfParams(eps=0.0, kbar=8)
    with pytest.raises(ValueError):
        MfParams(eps=0.1, kbar=8.0)      # non-integer


def test_map_boundary_values():
    params = MfParams(eps=0.13, kbar=8)
    assert mf_map(0.0, params) == pytest.approx(0.13, abs=1e-15)
    assert mf_map(1.0, params) == pytest.approx(0.87, abs=1e-15)


@pytest.mark.parametrize("kbar", [2, 4, 6, 8])
def test_map_matches_enumeration_oracle(kbar):
    params = MfParams(eps=0.1, kbar=kbar)
    for rho in np.linspace(0.0, 1.0, 21):
        assert abs(mf_map(rho, params)
                   - enumeration_oracle(rho, 0.1, kbar)) < 1e-12


def test_map_half_density_oracle():
    params = MfParams(eps=0.1, kbar=8)
    assert abs(mf_map(0.5, params) - enumeration_oracle(0.5, 0.1, 8)) < 1e-12


def test_map_bounded_on_dense_grid():
    for eps in (0.01, 0.25, 0.49):
        params = MfParams(eps=eps, kbar=8)
        vals = np.array([mf_map(r, params) for r in np.linspace(0, 1, 400)])
        assert np.all(vals > 0.0) and np.all(vals < 1.0)


def test_three_fixed_points_bistable():
    fps = mf_fixed_points(MfParams(eps=0.1, kbar=8))
    assert len(fps) == 3
    rhos = [fp["rho_star"] for fp in fps]
    stars = sorted(zip(rhos, [fp["stable"] for fp in fps]))
    assert stars[0][1] and not stars[1][1] and stars[2][1]
    # residual actually small at the roots
    for rho, _ in stars:
        assert abs(rho - mf_map(rho, MfParams(eps=0.1, kbar=8))) < 1e-9


def test_single_fixed_point_high_noise():
    fps = mf_fixed_points(MfParams(eps=0.45, kbar=8))
    assert len(fps) == 1
    assert abs(fps[0]["rho_star"] - 0.5) < 0.1


def test_root_count_odd_over_sweep():
    for eps in np.linspace(0.02, 0.48, 24):
        fps = mf_fixed_points(MfParams(eps=float(eps), kbar=8))
        assert len(fps) % 2 == 1


def test_low_branch_monotone_in_eps():
    lows = []
    for eps in np.linspace(0.12, 0.3, 10):
        fps = mf_fixed_points(MfParams(eps=float(eps), kbar=8))
        lows.append(min(fp["rho_star"] for fp in fps))
    assert np.all(np.diff(lows) > 0)


def test_limits_small_eps():
    prev_high, prev_low = 0.0, 1.0
    for eps in (0.05, 0.02, 0.01, 0.005):
        fps = mf_fixed_points(MfParams(eps=eps, kbar=8))
        rhos = sorted(fp["rho_star"] for fp in fps)
        assert rhos[-1] > prev_high   # high branch climbs toward 1
        assert rhos[0] < prev_low     # low branch sinks toward 0
        prev_high, prev_low = rhos[-1], rhos[0]
    assert prev_high > 0.99 and prev_low < 0.01


def test_derivative_matches_map_slope():
    params = MfParams(eps=0.2, kbar=8)
    h = 1e-6
    for rho in (0.2, 0.5, 0.8):
        ref = (mf_map(rho + h, params) - mf_map(rho - h, params)) / (2 * h)
        assert mf_derivative(rho, params) == pytest.approx(ref, rel=1e-6)


def test_diagram_reports_fold():
    eps_values = np.linspace(0.05, 0.45, 41)
    diagram = mf_bifurcation_diagram(eps_values, kbar=8)
    assert diagram["fold_eps"] is not None
    assert 0.1 < diagram["fold_eps"] < 0.4
    counts = {}
    for row in diagram["rows"]:
        counts.setdefault(row["eps"], 0)
        counts[row["eps"]] += 1
    # bistable window exists and closes
    assert max(counts.values()) == 3 and min(counts.values()) == 1


def test_mf_has_no_absorbing_state():
    params = MfParams(eps=0.1, kbar=8)
    assert mf_map(0.0, params) > 0.0
