"""Physical system model: channels, latency, energy and the joint utility.

All operations are pure functions of their inputs. Rates follow the equal
bandwidth-share Shannon model, compute latency follows the equal
processor-share rule of the assigned edge server, and per-user utility is the
weighted difference between earnings and total latency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .earnings import DEFAULT_PARAMS, EarnFamily, eval_earning, normalize_input

__all__ = [
    "SystemConfig",
    "UserProfile",
    "ServerProfile",
    "Association",
    "Allocation",
    "AssociationError",
    "AssociationViolation",
    "ZeroRateError",
    "dbm_per_hz_to_w_per_hz",
    "uplink_rate",
    "downlink_bits",
    "per_user_latency",
    "transmit_energy",
    "user_utility",
    "total_objective",
    "validate_association",
    "evaluate_allocation",
    "snap_resolution",
    "RESOLUTION_TIERS",
]

# One stereo frame pixel costs 24 bits per eye.
STEREO_BITS_PER_PIXEL = 48.0

RESOLUTION_TIERS = (
    ("720p", 1280 * 720),
    ("1080p", 1920 * 1080),
    ("1440p", 2560 * 1440),
    ("4k", 3840 * 2160),
    ("8k", 7680 * 4320),
)


def dbm_per_hz_to_w_per_hz(dbm_per_hz: float) -> float:
    """Convert a spectral density quoted in dBm/Hz to W/Hz."""
    return 10.0 ** ((dbm_per_hz - 30.0) / 10.0)


class ZeroRateError(ValueError):
    """Uplink latency is undefined at zero transmit power."""


@dataclass(frozen=True)
class SystemConfig:
    """Global constants shared by every user and server.

    The noise figure is a power spectral density in W/Hz (quoted network
    values in dBm/Hz convert via :func:`dbm_per_hz_to_w_per_hz`); per-user
    noise power is ``bandwidth_hz * noise / num_users``. Bandwidth, uplink
    payload and energy budgets have no published reference values; defaults
    here are desk-scale choices and freely overridable.
    """

    num_users: int
    num_servers: int
    bandwidth_hz: float = 20e6
    noise_density_w_per_hz: float = dbm_per_hz_to_w_per_hz(-134.0)
    weight_omega: float = 1.0
    eta_earn: float = 1.0
    eta_lat: float = 1.0
    lambda_up_flop_per_bit: float = 5.5e3
    s_min_px: float = 1280 * 720
    s_max_px: float = 7680 * 4320
    res_norm_px: float = 7680 * 4320
    rate_norm_bps: float = 20e6

    def __post_init__(self) -> None:
        if self.num_users < 1 or self.num_servers < 1:
            raise ValueError("need at least one user and one server")
        for name in ("bandwidth_hz", "noise_density_w_per_hz", "weight_omega",
                     "eta_earn", "eta_lat", "lambda_up_flop_per_bit",
                     "s_min_px", "s_max_px", "res_norm_px", "rate_norm_bps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.s_min_px < self.s_max_px:
            raise ValueError("s_min_px must be below s_max_px")

    @property
    def noise_power_w(self) -> float:
        """Noise power seen by one user's equal bandwidth share."""
        return self.bandwidth_hz * self.noise_density_w_per_hz / self.num_users


@dataclass(frozen=True)
class UserProfile:
    channel_gain: float
    uplink_bits: float
    compression_ratio: float
    downlink_rate_bps: float
    earn_scale: float
    earn_family: EarnFamily
    energy_budget_j: float
    power_cap_w: float
    lambda_down_flop_per_bit: float

    def __post_init__(self) -> None:
        for name in ("channel_gain", "uplink_bits", "compression_ratio",
                     "downlink_rate_bps", "earn_scale", "energy_budget_j",
                     "power_cap_w", "lambda_down_flop_per_bit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not isinstance(self.earn_family, EarnFamily):
            raise ValueError(f"unknown earning family: {self.earn_family!r}")


@dataclass(frozen=True)
class ServerProfile:
    compute_flops: float

    def __post_init__(self) -> None:
        if not self.compute_flops > 0:
            raise ValueError("compute_flops must be strictly positive")


@dataclass(frozen=True)
class AssociationViolation:
    row: int
    defect: str


class AssociationError(ValueError):
    def __init__(self, violations: Sequence[AssociationViolation]):
        self.violations = list(violations)
        detail = "; ".join(f"row {v.row}: {v.defect}" for v in self.violations)
        super().__init__(f"invalid association matrix: {detail}")


def validate_association(assign: np.ndarray) -> List[AssociationViolation]:
    """Check a K x N matrix for binary entries and one-hot rows.

    Returns an empty list when valid, otherwise one violation per bad row.
    """
    a = np.asarray(assign)
    if a.ndim != 2:
        return [AssociationViolation(-1, f"expected a 2-D matrix, got ndim={a.ndim}")]
    out: List[AssociationViolation] = []
    for k in range(a.shape[0]):
        row = a[k]
        if not np.all((row == 0) | (row == 1)):
            out.append(AssociationViolation(k, "non-binary entry"))
            continue
        total = int(row.sum())
        if total != 1:
            out.append(AssociationViolation(k, f"row-sum {total} != 1"))
    return out


@dataclass(frozen=True)
class Association:
    """One-hot user-to-server assignment matrix."""

    assign: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.assign, dtype=np.int64)
        violations = validate_association(a)
        if violations:
            raise AssociationError(violations)
        a.setflags(write=False)
        object.__setattr__(self, "assign", a)

    @classmethod
    def from_server_indices(cls, indices: Sequence[int], num_servers: int) -> "Association":
        idx = np.asarray(indices, dtype=np.int64)
        a = np.zeros((idx.size, num_servers), dtype=np.int64)
        a[np.arange(idx.size), idx] = 1
        return cls(a)

    @property
    def num_users(self) -> int:
        return self.assign.shape[0]

    @property
    def num_servers(self) -> int:
        return self.assign.shape[1]

    @property
    def server_indices(self) -> np.ndarray:
        return np.argmax(self.assign, axis=1)

    @property
    def loads(self) -> np.ndarray:
        """Number of users attached to each server."""
        return self.assign.sum(axis=0)


def uplink_rate(cfg: SystemConfig, user: UserProfile, power_w: float) -> float:
    """Shannon uplink rate on the user's equal bandwidth share, in bit/s."""
    if power_w < 0:
        raise ValueError(f"negative transmit power: {power_w}")
    if power_w == 0:
        return 0.0
    snr = user.channel_gain * power_w / cfg.noise_power_w
    share = cfg.bandwidth_hz / cfg.num_users
    return share * math.log1p(snr) / math.log(2.0)


def downlink_bits(cfg: SystemConfig, user: UserProfile, resolution_px: float) -> float:
    """Compressed downlink payload for one stereo frame at the given resolution."""
    if resolution_px < 0:
        raise ValueError(f"negative resolution: {resolution_px}")
    return STEREO_BITS_PER_PIXEL * resolution_px / user.compression_ratio


def transmit_energy(cfg: SystemConfig, user: UserProfile, power_w: float) -> float:
    """Energy spent pushing the uplink payload at the given power, in joules."""
    if power_w <= 0:
        raise ValueError(f"transmit power must be positive, got {power_w}")
    return power_w * user.uplink_bits / uplink_rate(cfg, user, power_w)


def per_user_latency(cfg: SystemConfig, users: Sequence[UserProfile],
                     servers: Sequence[ServerProfile], powers: Sequence[float],
                     resolutions: Sequence[float], association: Association,
                     k: int) -> Tuple[float, float, float]:
    """Uplink, downlink and compute latency of user k, in seconds."""
    user = users[k]
    p = float(powers[k])
    if p <= 0:
        raise ZeroRateError(f"user {k} has zero transmit power; uplink rate undefined")
    l_up = user.uplink_bits / uplink_rate(cfg, user, p)
    d_down = downlink_bits(cfg, user, float(resolutions[k]))
    l_down = d_down / user.downlink_rate_bps
    n = int(association.server_indices[k])
    count = int(association.loads[n])
    task_flops = cfg.lambda_up_flop_per_bit * user.uplink_bits \
        + user.lambda_down_flop_per_bit * d_down
    l_proc = task_flops * count / servers[n].compute_flops
    return l_up, l_down, l_proc


def _user_earning(cfg: SystemConfig, user: UserProfile, resolution_px: float) -> float:
    x = normalize_input(cfg, resolution_px, user.downlink_rate_bps)
    return eval_earning(DEFAULT_PARAMS[user.earn_family], user.earn_scale, x)


def user_utility(cfg: SystemConfig, users: Sequence[UserProfile],
                 servers: Sequence[ServerProfile], powers: Sequence[float],
                 resolutions: Sequence[float], association: Association,
                 k: int) -> float:
    """Weighted earnings-minus-latency utility of user k."""
    l_up, l_down, l_proc = per_user_latency(
        cfg, users, servers, powers, resolutions, association, k)
    earn = _user_earning(cfg, users[k], float(resolutions[k]))
    return cfg.eta_earn * earn - cfg.eta_lat * cfg.weight_omega * (l_up + l_down + l_proc)


def total_objective(cfg: SystemConfig, users: Sequence[UserProfile],
                    servers: Sequence[ServerProfile], powers: Sequence[float],
                    resolutions: Sequence[float], association: Association) -> float:
    """Negated sum of user utilities; the quantity the solvers minimize."""
    return -sum(
        user_utility(cfg, users, servers, powers, resolutions, association, k)
        for k in range(len(users)))


@dataclass(frozen=True)
class Allocation:
    """A full solution plus its latency/earnings/utility breakdown."""

    powers: np.ndarray
    resolutions: np.ndarray
    association: Association
    latency_up_s: np.ndarray
    latency_down_s: np.ndarray
    latency_proc_s: np.ndarray
    per_user_earnings: np.ndarray
    per_user_utility: np.ndarray
    objective: float

    @property
    def total_latency_s(self) -> np.ndarray:
        return self.latency_up_s + self.latency_down_s + self.latency_proc_s

    @property
    def snapped_resolutions(self) -> List[Tuple[str, int]]:
        return [snap_resolution(float(s)) for s in self.resolutions]


def evaluate_allocation(cfg: SystemConfig, users: Sequence[UserProfile],
                        servers: Sequence[ServerProfile], powers: Sequence[float],
                        resolutions: Sequence[float],
                        association: Association) -> Allocation:
    """Evaluate a candidate solution and bundle all derived quantities."""
    k_total = len(users)
    powers = np.asarray(powers, dtype=float)
    resolutions = np.asarray(resolutions, dtype=float)
    if powers.shape != (k_total,) or resolutions.shape != (k_total,):
        raise ValueError("powers/resolutions must have one entry per user")
    slack = 1e-9
    for k, user in enumerate(users):
        if not 0 < powers[k] <= user.power_cap_w * (1 + slack):
            raise ValueError(f"user {k} power {powers[k]} outside (0, p_max]")
        if not cfg.s_min_px * (1 - slack) <= resolutions[k] <= cfg.s_max_px * (1 + slack):
            raise ValueError(f"user {k} resolution {resolutions[k]} outside bounds")

    l_up = np.empty(k_total)
    l_down = np.empty(k_total)
    l_proc = np.empty(k_total)
    earn = np.empty(k_total)
    for k in range(k_total):
        l_up[k], l_down[k], l_proc[k] = per_user_latency(
            cfg, users, servers, powers, resolutions, association, k)
        earn[k] = _user_earning(cfg, users[k], float(resolutions[k]))
    utility = cfg.eta_earn * earn \
        - cfg.eta_lat * cfg.weight_omega * (l_up + l_down + l_proc)
    return Allocation(
        powers=powers,
        resolutions=resolutions,
        association=association,
        latency_up_s=l_up,
        latency_down_s=l_down,
        latency_proc_s=l_proc,
        per_user_earnings=earn,
        per_user_utility=utility,
        objective=float(-utility.sum()),
    )


def snap_resolution(resolution_px: float) -> Tuple[str, int]:
    """Nearest standard display tier to a continuous pixel count."""
    return min(RESOLUTION_TIERS, key=lambda tier: abs(tier[1] - resolution_px))
