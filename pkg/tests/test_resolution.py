import itertools

import numpy as np
import pytest

from mecopt.earnings import DEFAULT_PARAMS, EarnFamily, EarnParams
from mecopt.model import Association, ServerProfile, total_objective
from mecopt.resolution import (ResolutionSubproblem, latency_coefficient,
                               make_subproblem, optimal_resolution,
                               resolution_objective)
from helpers import make_cfg, make_user, small_scenario


def test_latency_coefficient_pure_transmission():
    # compute term switched off by a vanishing per-bit complexity
    cfg = make_cfg(weight_omega=2.0, eta_lat=3.0)
    user = make_user(compression_ratio=480.0, downlink_rate_bps=10e6,
                     lambda_down_flop_per_bit=1e-300)
    c1 = latency_coefficient(cfg, user, 1, ServerProfile(1e12))
    want = 3.0 * 2.0 * (48.0 / 480.0) / 10e6
    assert c1 == pytest.approx(want, rel=1e-12)


def test_latency_coefficient_compute_share_scales_with_load():
    cfg = make_cfg()
    user = make_user(downlink_rate_bps=1e18)  # transmission part negligible
    server = ServerProfile(1e12)
    c1 = latency_coefficient(cfg, user, 1, server)
    c2 = latency_coefficient(cfg, user, 2, server)
    assert c2 == pytest.approx(2.0 * c1, rel=1e-9)
    with pytest.raises(ValueError):
        latency_coefficient(cfg, user, 0, server)


def test_latency_coefficient_is_objective_slope_without_earnings(rng):
    cfg, users, servers = small_scenario(50, 3, 2, eta_earn=1e-300,
                                         weight_omega=1.7)
    assoc = Association.from_server_indices([0, 1, 0], 2)
    powers = np.full(3, 0.1)
    res = rng.uniform(cfg.s_min_px, cfg.s_max_px / 2, 3)
    k = 0
    n = int(assoc.server_indices[k])
    c1 = latency_coefficient(cfg, users[k], int(assoc.loads[n]), servers[n])
    delta = 1e4
    bumped = res.copy()
    bumped[k] += delta
    df = total_objective(cfg, users, servers, powers, bumped, assoc) \
        - total_objective(cfg, users, servers, powers, res, assoc)
    assert df == pytest.approx(c1 * delta, rel=1e-6)


def _subproblem(**kw):
    base = dict(user_index=0, latency_coeff=2e-7, earn_scale=1.0,
                dx_ds=0.5 / (7680 * 4320), x_offset=0.375,
                bounds=(1280 * 720, 7680 * 4320))
    base.update(kw)
    return ResolutionSubproblem(**base)


def test_vanishing_latency_cost_drives_to_max():
    sub = _subproblem(latency_coeff=1e-300)
    for params in DEFAULT_PARAMS.values():
        assert optimal_resolution(sub, params) == sub.bounds[1]


def test_zero_earn_scale_drives_to_min():
    sub = _subproblem(earn_scale=0.0)
    for params in DEFAULT_PARAMS.values():
        assert optimal_resolution(sub, params) == sub.bounds[0]


@pytest.mark.parametrize("family", list(EarnFamily))
def test_closed_form_beats_grid(family, rng):
    params = DEFAULT_PARAMS[family]
    for _ in range(30):
        sub = _subproblem(latency_coeff=10 ** rng.uniform(-9, -5.5),
                          earn_scale=rng.uniform(0.3, 3.0),
                          x_offset=rng.uniform(0.25, 0.5))
        s_star = optimal_resolution(sub, params)
        grid = np.linspace(sub.bounds[0], sub.bounds[1], 10_000)
        vals = np.array([resolution_objective(sub, params, float(s)) for s in grid])
        best = int(np.argmax(vals))
        step_var = abs(vals[min(best + 1, len(vals) - 1)] - vals[best]) \
            + abs(vals[best] - vals[max(best - 1, 0)])
        assert resolution_objective(sub, params, s_star) \
            >= vals[best] - step_var - 1e-9


def test_linear_power_family_goes_to_an_endpoint():
    params = EarnParams(EarnFamily.POW, 2.0, 1.0)
    sub = _subproblem(latency_coeff=1e-9, earn_scale=1.0)
    assert optimal_resolution(sub, params) == sub.bounds[1]
    sub = _subproblem(latency_coeff=1e-3, earn_scale=1.0)
    assert optimal_resolution(sub, params) == sub.bounds[0]


def test_objective_concave_at_sampled_points(rng):
    h = 1e5  # wide stencil: curvature per pixel sits below float resolution
    for params in DEFAULT_PARAMS.values():
        sub = _subproblem()
        for s in rng.uniform(sub.bounds[0] + h, sub.bounds[1] - h, 100):
            second = (resolution_objective(sub, params, s + h)
                      - 2 * resolution_objective(sub, params, s)
                      + resolution_objective(sub, params, s - h)) / h ** 2
            assert second < 0


def test_comparative_statics(rng):
    params = DEFAULT_PARAMS[EarnFamily.EXP]
    costs = np.geomspace(1e-8, 1e-5, 12)
    sols = [optimal_resolution(_subproblem(latency_coeff=float(c)), params)
            for c in costs]
    assert all(b <= a + 1e-9 for a, b in zip(sols, sols[1:]))
    scales = np.geomspace(0.1, 10.0, 12)
    sols = [optimal_resolution(_subproblem(earn_scale=float(t)), params)
            for t in scales]
    assert all(b >= a - 1e-9 for a, b in zip(sols, sols[1:]))


def test_per_user_solves_commute(rng):
    cfg, users, servers = small_scenario(51, 4, 2, weight_omega=2.75)
    assoc = Association.from_server_indices([0, 1, 0, 1], 2)
    powers = np.full(4, 0.1)
    loads = assoc.loads

    def solve_order(order):
        res = np.full(4, cfg.s_min_px)
        for k in order:
            n = int(assoc.server_indices[k])
            sub = make_subproblem(cfg, users[k], k, int(loads[n]), servers[n])
            res[k] = optimal_resolution(sub, DEFAULT_PARAMS[users[k].earn_family])
        return total_objective(cfg, users, servers, powers, res, assoc)

    values = {solve_order(list(p)) for p in itertools.permutations(range(4))}
    assert max(values) - min(values) <= 1e-12 * max(1.0, abs(max(values)))


def test_subproblem_validation():
    with pytest.raises(ValueError):
        _subproblem(latency_coeff=0.0)
    with pytest.raises(ValueError):
        _subproblem(bounds=(2e6, 1e6))
