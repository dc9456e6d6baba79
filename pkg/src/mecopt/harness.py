"""Scenario generation, experiment sweeps and CSV emission.

Scenarios draw users uniformly over an annulus around the base station with
3GPP-style path loss, sample every per-user parameter from configurable
ranges, and resample users whose energy budget cannot be met at any positive
power. Sweeps run each method over a grid of one swept quantity across many
seeded scenarios and emit deterministic CSV rows.
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .association import QcqpInstance, SdrResult
from .earnings import DEFAULT_PARAMS, EarnFamily, eval_earning, normalize_input
from .model import ServerProfile, SystemConfig, UserProfile
from .optimizer import (BaselineKind, SolveOptions, run_baseline, solve_joint)
from .power import feasibility_ratio

__all__ = [
    "ScenarioSpec",
    "SweepKind",
    "ResultRow",
    "CSV_HEADER",
    "generate_scenario",
    "run_sweep",
    "emit_results",
    "opt_earnings_total",
    "METHODS",
]

log = logging.getLogger("mecopt")

METHODS = ("proposed", "optlat", "optearn", "random")

CSV_HEADER = ("method,seed,omega,s_min_px,num_users,mean_latency_s,"
              "mean_earnings_norm,mean_utility,iters,sdr_gap,wall_ms,status")

_FAMILY_ORDER = (EarnFamily.POW, EarnFamily.LOG, EarnFamily.EXP)
_RESAMPLE_CAP = 100


@dataclass(frozen=True)
class ScenarioSpec:
    """Sampling ranges and counts for one random scenario family."""

    seed: int = 0
    num_users: int = 20
    num_servers: int = 5
    cell_radius_km: float = 0.5
    min_distance_km: float = 0.05
    compute_flops: Tuple[float, float] = (1e12, 5e12)
    compression: Tuple[float, float] = (300.0, 600.0)
    downlink_rate_bps: Tuple[float, float] = (10e6, 20e6)
    flop_per_px: Tuple[float, float] = (1e3, 100e3)
    tau: Tuple[float, float] = (0.5, 1.5)
    uplink_bits: Tuple[float, float] = (50e3, 200e3)
    energy_budget_j: Tuple[float, float] = (0.05, 0.2)
    power_cap_w: float = 0.2
    config_overrides: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.num_users < 1 or self.num_servers < 1:
            raise ValueError("need at least one user and one server")
        if not 0 < self.min_distance_km < self.cell_radius_km:
            raise ValueError("distances must satisfy 0 < min < radius")
        for name in ("compute_flops", "compression", "downlink_rate_bps",
                     "flop_per_px", "tau", "uplink_bits", "energy_budget_j"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"range {name} must be ordered and positive")
        if not self.power_cap_w > 0:
            raise ValueError("power_cap_w must be positive")


def path_loss_gain(distance_km: float) -> float:
    """Linear channel gain from the 128.1 + 37.6 log10(d) path-loss law."""
    pl_db = 128.1 + 37.6 * np.log10(distance_km)
    return float(10.0 ** (-pl_db / 10.0))


def _draw_user(rng: np.random.Generator, spec: ScenarioSpec) -> UserProfile:
    # Area-uniform radius over the annulus [min_distance, cell_radius].
    r2 = rng.uniform(spec.min_distance_km ** 2, spec.cell_radius_km ** 2)
    gain = path_loss_gain(float(np.sqrt(r2)))
    uplink = rng.uniform(*spec.uplink_bits)
    compression = rng.uniform(*spec.compression)
    rate = rng.uniform(*spec.downlink_rate_bps)
    kappa = rng.uniform(*spec.flop_per_px)
    tau = rng.uniform(*spec.tau)
    energy = rng.uniform(*spec.energy_budget_j)
    family = _FAMILY_ORDER[int(rng.integers(0, len(_FAMILY_ORDER)))]
    return UserProfile(
        channel_gain=gain,
        uplink_bits=uplink,
        compression_ratio=compression,
        downlink_rate_bps=rate,
        earn_scale=tau,
        earn_family=family,
        energy_budget_j=energy,
        power_cap_w=spec.power_cap_w,
        # per-pixel complexity kappa stored per bit so that flops per frame
        # equal kappa times the pixel count exactly
        lambda_down_flop_per_bit=kappa * compression / 48.0,
    )


def generate_scenario(spec: ScenarioSpec,
                      ) -> Tuple[SystemConfig, List[UserProfile], List[ServerProfile]]:
    """Draw one scenario; energy-infeasible users are redrawn then dropped."""
    rng = np.random.default_rng(spec.seed)
    servers = [ServerProfile(compute_flops=float(f))
               for f in rng.uniform(*spec.compute_flops, size=spec.num_servers)]

    overrides = dict(spec.config_overrides)
    unknown = set(overrides) - {f.name for f in dataclasses.fields(SystemConfig)}
    if unknown:
        raise ValueError(f"unknown SystemConfig overrides: {sorted(unknown)}")
    probe_cfg = SystemConfig(num_users=spec.num_users,
                             num_servers=spec.num_servers, **overrides)

    users: List[UserProfile] = []
    dropped = 0
    resampled = 0
    for _ in range(spec.num_users):
        accepted = None
        for attempt in range(_RESAMPLE_CAP + 1):
            user = _draw_user(rng, spec)
            if feasibility_ratio(probe_cfg, user) < 1.0:
                accepted = user
                resampled += attempt
                break
        if accepted is None:
            dropped += 1
        else:
            users.append(accepted)
    if dropped or resampled:
        log.info("scenario seed=%d: %d users dropped as energy-infeasible, "
                 "%d resample draws", spec.seed, dropped, resampled)
    if not users:
        raise ValueError("every sampled user was energy-infeasible")

    cfg = SystemConfig(num_users=len(users), num_servers=spec.num_servers,
                       **overrides)
    return cfg, users, servers


class SweepKind(Enum):
    OMEGA = "omega"
    SMIN = "smin"
    USERS = "users"


@dataclass
class ResultRow:
    method: str
    seed: int
    omega: float
    s_min_px: float
    num_users: int
    mean_latency_s: float
    mean_earnings_norm: float
    mean_utility: float
    iters: int
    sdr_gap: float
    wall_ms: float
    status: str = "ok"


def opt_earnings_total(cfg: SystemConfig, users: Sequence[UserProfile]) -> float:
    """Scenario-wide earnings at maximum resolution; the normalization anchor."""
    return sum(
        eval_earning(DEFAULT_PARAMS[u.earn_family], u.earn_scale,
                     normalize_input(cfg, cfg.s_max_px, u.downlink_rate_bps))
        for u in users)


def _memoized_association_solver(cache: Dict[bytes, SdrResult]):
    from .optimizer import _default_association_solver

    def solver(inst: QcqpInstance, opts: SolveOptions,
               initial: Optional[np.ndarray]) -> SdrResult:
        key = (inst.task_flops.tobytes() + inst.server_flops.tobytes()
               + inst.a_dim.to_bytes(4, "little"))
        hit = cache.get(key)
        if hit is not None:
            # The relaxation is invariant to the cost scale, so the cached
            # factor is reused and only the bound is recomputed.
            bound = float((inst.scale * 0.5 * (inst.p1 + inst.p1.T) * hit.b_star).sum())
            return SdrResult(hit.b_star, bound, hit.solution)
        res = _default_association_solver(inst, opts, initial)
        cache[key] = res
        return res

    return solver


def _solve_method(method: str, cfg: SystemConfig, users, servers,
                  opts: SolveOptions, assoc_solver) -> Tuple:
    if method == "proposed":
        alloc, trace = solve_joint(cfg, users, servers, opts,
                                   association_solver=assoc_solver)
        iters = len(trace.objective_values) - 1
        gap = trace.sdr_gaps[-1] if trace.sdr_gaps else 0.0
        return alloc, iters, gap
    kind = {"optlat": BaselineKind.OPT_LATENCY,
            "optearn": BaselineKind.OPT_EARNINGS,
            "random": BaselineKind.RANDOM}[method]
    alloc = run_baseline(kind, cfg, users, servers, opts)
    return alloc, (1 if kind is BaselineKind.OPT_LATENCY else 0), 0.0


def run_sweep(kind: SweepKind, spec: ScenarioSpec, methods: Sequence[str],
              grid: Sequence[float], num_seeds: int = 20,
              rand_samples: int = 1000, sdp_tol: float = 3e-4,
              sdp_max_iter: int = 2000) -> List[ResultRow]:
    """Run every (grid point, seed, method) combination into result rows.

    Deterministic for a fixed spec: scenario seeds are spec.seed + i and all
    solver randomness derives from them. Per-point failures are recorded in
    the row's status and the sweep continues.
    """
    if not grid:
        raise ValueError("sweep grid must be non-empty")
    bad = set(methods) - set(METHODS)
    if bad:
        raise ValueError(f"unknown methods: {sorted(bad)}")

    rows: List[ResultRow] = []
    for i in range(num_seeds):
        scen_seed = spec.seed + i
        seeded = dataclasses.replace(spec, seed=scen_seed)
        base: Optional[Tuple] = None
        if kind is not SweepKind.USERS:
            base = generate_scenario(seeded)
        sdr_cache: Dict[bytes, SdrResult] = {}
        for value in grid:
            if kind is SweepKind.USERS:
                cfg, users, servers = generate_scenario(
                    dataclasses.replace(seeded, num_users=int(value)))
            else:
                cfg, users, servers = base
                if kind is SweepKind.OMEGA:
                    cfg = dataclasses.replace(cfg, weight_omega=float(value))
                else:
                    cfg = dataclasses.replace(cfg, s_min_px=float(value))
            norm = opt_earnings_total(cfg, users)
            assoc_solver = _memoized_association_solver(sdr_cache)
            for method in methods:
                opts = SolveOptions(rng_seed=scen_seed, rand_samples_l=rand_samples,
                                    sdp_tol=sdp_tol, sdp_max_iter=sdp_max_iter)
                start = time.perf_counter()
                try:
                    alloc, iters, gap = _solve_method(
                        method, cfg, users, servers, opts, assoc_solver)
                    row = ResultRow(
                        method=method,
                        seed=scen_seed,
                        omega=cfg.weight_omega,
                        s_min_px=cfg.s_min_px,
                        num_users=cfg.num_users,
                        mean_latency_s=float(alloc.total_latency_s.mean()),
                        mean_earnings_norm=float(alloc.per_user_earnings.sum() / norm),
                        mean_utility=float(alloc.per_user_utility.mean()),
                        iters=iters,
                        sdr_gap=gap,
                        wall_ms=(time.perf_counter() - start) * 1e3,
                    )
                except Exception as exc:  # per-point failure, keep sweeping
                    log.warning("sweep point failed (%s, seed=%d, value=%g): %s",
                                method, scen_seed, value, exc)
                    row = ResultRow(
                        method=method, seed=scen_seed, omega=cfg.weight_omega,
                        s_min_px=cfg.s_min_px, num_users=cfg.num_users,
                        mean_latency_s=float("nan"),
                        mean_earnings_norm=float("nan"),
                        mean_utility=float("nan"), iters=0, sdr_gap=float("nan"),
                        wall_ms=(time.perf_counter() - start) * 1e3,
                        status=f"error:{type(exc).__name__}",
                    )
                rows.append(row)
    return rows


def _fmt(value: float) -> str:
    return format(value, ".9g")


def emit_results(rows: Sequence[ResultRow], path, include_timings: bool = False) -> None:
    """Write rows as CSV, sorted by (method, sweep value, seed).

    wall_ms is written as 0 unless include_timings is set, keeping default
    output byte-identical across reruns of the same seed.
    """
    if not rows:
        raise ValueError("no rows to emit")
    ordered = sorted(rows, key=lambda r: (r.method, r.omega, r.s_min_px,
                                          r.num_users, r.seed))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in ordered:
            wall = r.wall_ms if include_timings else 0.0
            fh.write(",".join([
                r.method,
                str(r.seed),
                _fmt(r.omega),
                _fmt(r.s_min_px),
                str(r.num_users),
                _fmt(r.mean_latency_s),
                _fmt(r.mean_earnings_norm),
                _fmt(r.mean_utility),
                str(r.iters),
                _fmt(r.sdr_gap),
                _fmt(wall),
                r.status,
            ]) + "\n")
