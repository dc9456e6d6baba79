import dataclasses

import numpy as np
import pytest

from mecopt.harness import (CSV_HEADER, ResultRow, ScenarioSpec, SweepKind,
                            emit_results, generate_scenario, opt_earnings_total,
                            path_loss_gain, run_sweep)
from mecopt.power import feasibility_ratio
from helpers import spearman

FAST_SWEEP = dict(rand_samples=200, sdp_tol=5e-4, sdp_max_iter=1500)


def test_path_loss_at_one_km():
    assert path_loss_gain(1.0) == pytest.approx(10 ** -12.81, rel=1e-12)


def test_scenario_is_deterministic():
    spec = ScenarioSpec(seed=5, num_users=8, num_servers=3)
    cfg1, users1, servers1 = generate_scenario(spec)
    cfg2, users2, servers2 = generate_scenario(spec)
    assert cfg1 == cfg2
    assert users1 == users2
    assert servers1 == servers2


def test_scenario_respects_ranges_and_feasibility():
    spec = ScenarioSpec(seed=8, num_users=10_000, num_servers=3)
    cfg, users, servers = generate_scenario(spec)
    gains = np.array([u.channel_gain for u in users])
    g_lo = path_loss_gain(spec.cell_radius_km)
    g_hi = path_loss_gain(spec.min_distance_km)
    assert np.all((gains >= g_lo) & (gains <= g_hi))
    for name, attr in [("uplink_bits", "uplink_bits"),
                       ("compression", "compression_ratio"),
                       ("downlink_rate_bps", "downlink_rate_bps"),
                       ("tau", "earn_scale"),
                       ("energy_budget_j", "energy_budget_j")]:
        lo, hi = getattr(spec, name)
        vals = np.array([getattr(u, attr) for u in users])
        assert np.all((vals >= lo) & (vals <= hi)), name
    # per-pixel complexity recovered from the stored per-bit value
    kappa = np.array([u.lambda_down_flop_per_bit * 48.0 / u.compression_ratio
                      for u in users])
    assert np.all((kappa >= spec.flop_per_px[0] - 1e-6)
                  & (kappa <= spec.flop_per_px[1] + 1e-6))
    assert all(feasibility_ratio(cfg, u) < 1.0 for u in users)


def test_server_compute_sampling_statistics():
    spec = ScenarioSpec(seed=9, num_users=1, num_servers=10_000)
    _, _, servers = generate_scenario(spec)
    f = np.array([s.compute_flops for s in servers])
    assert np.all((f >= 1e12) & (f <= 5e12))
    assert abs(f.mean() - 3e12) / 3e12 < 0.03


def test_scenario_overrides_and_validation():
    spec = ScenarioSpec(seed=1, num_users=3, num_servers=2,
                        config_overrides={"weight_omega": 3.5})
    cfg, _, _ = generate_scenario(spec)
    assert cfg.weight_omega == 3.5
    with pytest.raises(ValueError):
        generate_scenario(dataclasses.replace(
            spec, config_overrides={"not_a_field": 1.0}))
    with pytest.raises(ValueError):
        ScenarioSpec(tau=(2.0, 1.0))
    with pytest.raises(ValueError):
        ScenarioSpec(min_distance_km=0.9, cell_radius_km=0.5)


def test_sweep_covers_every_combination_once():
    spec = ScenarioSpec(seed=3, num_users=4, num_servers=2)
    rows = run_sweep(SweepKind.OMEGA, spec, ["proposed", "random"],
                     [1.0, 2.0], num_seeds=2, **FAST_SWEEP)
    combos = {(r.method, r.omega, r.seed) for r in rows}
    assert len(rows) == len(combos) == 8
    assert all(r.status == "ok" for r in rows)
    assert all(r.mean_earnings_norm <= 1.0 + 1e-9 for r in rows)


def test_smin_sweep_forces_latency_up_for_optlat():
    spec = ScenarioSpec(seed=4, num_users=6, num_servers=2)
    grid = [921600.0, 8294400.0, 20736000.0]
    rows = run_sweep(SweepKind.SMIN, spec, ["optlat"], grid, num_seeds=3,
                     **FAST_SWEEP)
    means = [np.mean([r.mean_latency_s for r in rows if r.s_min_px == v])
             for v in grid]
    assert means[0] < means[1] < means[2]


def test_user_count_sweep_raises_latency():
    # contrast the endpoints; at tiny scale the resolution re-optimization
    # can locally mask the extra load between nearby user counts
    spec = ScenarioSpec(seed=6, num_users=4, num_servers=2)
    grid = [4.0, 16.0]
    rows = run_sweep(SweepKind.USERS, spec, ["proposed", "random"], grid,
                     num_seeds=6, **FAST_SWEEP)
    for method in ("proposed", "random"):
        means = [np.mean([r.mean_latency_s for r in rows
                          if r.num_users == int(v) and r.method == method])
                 for v in grid]
        assert means[0] < means[1], method


def test_omega_sweep_trends_down():
    spec = ScenarioSpec(seed=7, num_users=8, num_servers=3)
    grid = [0.5, 1.5, 3.0, 5.0]
    rows = run_sweep(SweepKind.OMEGA, spec, ["proposed"], grid, num_seeds=4,
                     **FAST_SWEEP)
    lat = [np.mean([r.mean_latency_s for r in rows if r.omega == v])
           for v in grid]
    assert spearman(grid, lat) <= -0.9


def test_emit_results_round_trip(tmp_path):
    rows = [
        ResultRow("random", 2, 1.0, 921600.0, 4, 0.123456789123, 0.5, 1.0,
                  0, 0.0, 12.5),
        ResultRow("proposed", 1, 1.0, 921600.0, 4, 1.0 / 3.0, 0.25, -2.0,
                  3, 1e-3, 80.0),
    ]
    out = tmp_path / "rows.csv"
    emit_results(rows, out)
    lines = out.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[1].startswith("proposed,1,")  # sorted by method
    fields = lines[2].split(",")
    assert float(fields[5]) == pytest.approx(0.123456789123, rel=1e-9)
    assert fields[10] == "0"  # wall time placeholder by default
    emit_results(rows, out, include_timings=True)
    assert out.read_text().splitlines()[2].split(",")[10] == "12.5"


def test_emit_results_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        emit_results([], tmp_path / "never.csv")


def test_sweep_csv_byte_determinism(tmp_path):
    spec = ScenarioSpec(seed=12, num_users=4, num_servers=2)
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (out1, out2):
        rows = run_sweep(SweepKind.OMEGA, spec, ["proposed", "random"],
                         [1.0, 3.0], num_seeds=2, **FAST_SWEEP)
        emit_results(rows, out)
    assert out1.read_bytes() == out2.read_bytes()


def test_opt_earnings_total_positive():
    spec = ScenarioSpec(seed=2, num_users=5, num_servers=2)
    cfg, users, _ = generate_scenario(spec)
    assert opt_earnings_total(cfg, users) > 0
