"""Small dense semidefinite programs.

Solves min Tr(C X) over symmetric X subject to trace equalities
Tr(A_i X) = b_i, elementwise nonnegativity on a mask, at most one trace
inequality Tr(Y X) <= 0, and X >= 0 (PSD), via consensus operator splitting:
one variable copy per constraint group, each updated by an exact projection
(cached least-squares solve for the equalities, clamping for the sign mask,
a closed-form half-space step, and an eigenvalue clamp for the cone), tied
together by an averaging step that carries the cost and a scaled dual update.

Problem sizes here are two-digit dimensions; everything is plain dense numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "AsymmetricMatrixError",
    "SdpProblem",
    "SdpSolution",
    "SdpStatus",
    "symmetric_eig",
    "jacobi_eig",
    "project_psd",
    "solve_sdp",
]

_SYM_TOL = 1e-9


class AsymmetricMatrixError(ValueError):
    pass


def _check_symmetric(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise AsymmetricMatrixError(f"{name} must be square, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if float(np.abs(a - a.T).max(initial=0.0)) > _SYM_TOL * scale:
        raise AsymmetricMatrixError(f"{name} is not symmetric within {_SYM_TOL}")
    return 0.5 * (a + a.T)


def symmetric_eig(a: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    return np.linalg.eigh(_check_symmetric(a))


def jacobi_eig(a: np.ndarray, tol: float = 1e-12,
               max_sweeps: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Rotates away off-diagonal entries sweep by sweep until the off-diagonal
    norm drops below tol times the matrix norm. Quadratic-time per sweep and
    meant for small matrices; the production path uses :func:`symmetric_eig`,
    and this routine serves as an independent cross-check of it.
    """
    m = _check_symmetric(a).copy()
    n = m.shape[0]
    v = np.eye(n)
    norm_a = float(np.linalg.norm(m)) or 1.0

    def off_norm() -> float:
        off = m - np.diag(np.diag(m))
        return float(np.linalg.norm(off))

    for _ in range(max_sweeps):
        if off_norm() <= tol * norm_a:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if abs(apq) <= 1e-300:
                    continue
                phi = 0.5 * math.atan2(2.0 * apq, m[q, q] - m[p, p])
                c, s = math.cos(phi), math.sin(phi)
                rot_p = c * m[p, :] - s * m[q, :]
                rot_q = s * m[p, :] + c * m[q, :]
                m[p, :], m[q, :] = rot_p, rot_q
                col_p = c * m[:, p] - s * m[:, q]
                col_q = s * m[:, p] + c * m[:, q]
                m[:, p], m[:, q] = col_p, col_q
                m[p, q] = m[q, p] = 0.0
                vp = c * v[:, p] - s * v[:, q]
                vq = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = vp, vq
    w = np.diag(m).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def project_psd(a: np.ndarray) -> np.ndarray:
    """Nearest (Frobenius) positive semidefinite matrix to a symmetric input."""
    sym = _check_symmetric(a)
    w, v = np.linalg.eigh(sym)
    if w[0] >= 0.0:
        return sym
    return (v * np.maximum(w, 0.0)) @ v.T


@dataclass(frozen=True)
class SdpProblem:
    """One SDP instance of the shape described in the module docstring.

    nonneg_mask marks the entries forced to be nonnegative (None for no sign
    constraints); trace_ineq is the Y of Tr(Y X) <= 0, or None.
    """

    dim: int
    cost: np.ndarray
    eq_constraints: Sequence[Tuple[np.ndarray, float]]
    nonneg_mask: Optional[np.ndarray] = None
    trace_ineq: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        n = self.dim
        cost = _check_symmetric(self.cost, "cost")
        if cost.shape != (n, n):
            raise ValueError(f"cost shape {cost.shape} != ({n}, {n})")
        eqs = []
        for i, (mat, rhs) in enumerate(self.eq_constraints):
            mat = _check_symmetric(mat, f"equality constraint {i}")
            if mat.shape != (n, n):
                raise ValueError(f"constraint {i} shape {mat.shape} != ({n}, {n})")
            eqs.append((mat, float(rhs)))
        mask = self.nonneg_mask
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != (n, n):
                raise ValueError(f"mask shape {mask.shape} != ({n}, {n})")
            if not np.array_equal(mask, mask.T):
                raise ValueError("nonneg mask must be symmetric")
        ineq = self.trace_ineq
        if ineq is not None:
            ineq = _check_symmetric(ineq, "trace inequality")
            if ineq.shape != (n, n):
                raise ValueError(f"trace inequality shape {ineq.shape} != ({n}, {n})")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "eq_constraints", tuple(eqs))
        object.__setattr__(self, "nonneg_mask", mask)
        object.__setattr__(self, "trace_ineq", ineq)


class SdpStatus(Enum):
    CONVERGED = "converged"
    ITERATION_CAP = "iteration_cap"


@dataclass
class SdpSolution:
    """Solver output. primal_residual aggregates normalized feasibility error
    (equalities, sign mask, trace inequality, cone) together with the
    consensus gap; dual_residual tracks the averaged-iterate movement."""

    x: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    iterations: int
    status: SdpStatus
    residual_history: List[Tuple[int, float, float]] = field(default_factory=list, repr=False)


_CHECK_EVERY = 25
_RHO_EVERY = 50
_RHO_RATIO = 5.0
_RHO_FACTOR = 1.5
_MAX_RHO_CHANGES = 80


def solve_sdp(prob: SdpProblem, tol: float = 1e-6, max_iter: int = 20000,
              rho: float = 1.0, initial: Optional[np.ndarray] = None) -> SdpSolution:
    """Run the splitting iteration until feasibility and consensus reach tol.

    Convergence demands, on the averaged iterate: equality residuals below
    tol * max(1, |b|), mask entries above -0.1 * tol, trace inequality below
    tol, smallest eigenvalue above -0.1 * tol * ||X||, and both consensus
    residuals below tol. Hitting max_iter returns ITERATION_CAP with the
    residuals attached so the caller can judge acceptability.
    """
    n = prob.dim
    cost = prob.cost
    c_scale = float(np.linalg.norm(cost))
    cost_n = cost / c_scale if c_scale > 0 else cost

    m = len(prob.eq_constraints)
    if m:
        a_mat = np.stack([mat.ravel() for mat, _ in prob.eq_constraints])
        b_vec = np.array([rhs for _, rhs in prob.eq_constraints])
        gram_inv = np.linalg.pinv(a_mat @ a_mat.T)
        b_ref = np.maximum(1.0, np.abs(b_vec))
    mask = prob.nonneg_mask
    y_ineq = prob.trace_ineq
    if y_ineq is not None:
        y_nrm2 = float((y_ineq * y_ineq).sum())
    if m and y_ineq is not None:
        # Equalities and the half-space share one consensus copy: project
        # onto the equalities, and if that lands outside the half-space the
        # inequality is active, so reproject onto the augmented equality
        # system. Both factorizations are cached.
        aug_mat = np.vstack([a_mat, y_ineq.ravel()[None, :]])
        aug_b = np.concatenate([b_vec, [0.0]])
        aug_gram_inv = np.linalg.pinv(aug_mat @ aug_mat.T)

    kinds = []
    if m or y_ineq is not None:
        kinds.append("affine")
    if mask is not None:
        kinds.append("mask")
    kinds.append("psd")
    ns = len(kinds)

    if initial is not None:
        z = 0.5 * (np.asarray(initial, dtype=float) + np.asarray(initial, dtype=float).T)
        if z.shape != (n, n):
            raise ValueError(f"initial iterate shape {z.shape} != ({n}, {n})")
        z = z.copy()
    else:
        z = np.zeros((n, n))
    duals = [np.zeros((n, n)) for _ in kinds]
    copies = [np.zeros((n, n)) for _ in kinds]

    history: List[Tuple[int, float, float]] = []
    rho_changes = 0
    status = SdpStatus.ITERATION_CAP
    prim_n = dual_n = math.inf
    feas = math.inf
    it = 0

    for it in range(1, max_iter + 1):
        for i, kind in enumerate(kinds):
            v = z - duals[i]
            if kind == "affine":
                if m:
                    resid = a_mat @ v.ravel() - b_vec
                    w = v - (a_mat.T @ (gram_inv @ resid)).reshape(n, n)
                    if y_ineq is not None and float((y_ineq * w).sum()) > 0.0:
                        resid = aug_mat @ v.ravel() - aug_b
                        w = v - (aug_mat.T @ (aug_gram_inv @ resid)).reshape(n, n)
                else:
                    s = float((y_ineq * v).sum())
                    w = v - (s / y_nrm2) * y_ineq if s > 0.0 else v
            elif kind == "mask":
                w = np.where(mask, np.maximum(v, 0.0), v)
            else:
                ew, ev = np.linalg.eigh(0.5 * (v + v.T))
                w = v if ew[0] >= 0.0 else (ev * np.maximum(ew, 0.0)) @ ev.T
            copies[i] = w

        z_new = sum(copies[i] + duals[i] for i in range(ns)) / ns \
            - cost_n / (ns * rho)
        z_new = 0.5 * (z_new + z_new.T)
        for i in range(ns):
            duals[i] += copies[i] - z_new

        if it % _CHECK_EVERY == 0 or it == max_iter:
            den = max(1.0, float(np.linalg.norm(z_new)))
            prim = max(float(np.linalg.norm(c - z_new)) for c in copies)
            dual = rho * math.sqrt(ns) * float(np.linalg.norm(z_new - z))
            prim_n, dual_n = prim / den, dual / den
            eq_v = float(np.max(np.abs(a_mat @ z_new.ravel() - b_vec) / b_ref)) if m else 0.0
            mask_v = max(0.0, -float(z_new[mask].min())) if mask is not None and mask.any() else 0.0
            ineq_v = max(0.0, float((y_ineq * z_new).sum())) if y_ineq is not None else 0.0
            eig_lo = float(np.linalg.eigvalsh(z_new)[0])
            den_x = max(float(np.linalg.norm(z_new)), 1e-12)
            eig_v = max(0.0, -eig_lo)
            history.append((it, prim_n, dual_n))
            feas = max(eq_v, mask_v, ineq_v, eig_v / den_x)
            if (prim_n < tol and dual_n < tol and eq_v < tol
                    and mask_v <= 0.1 * tol and ineq_v <= tol
                    and eig_v <= 0.1 * tol * den_x):
                z = z_new
                status = SdpStatus.CONVERGED
                break
            if (it % _RHO_EVERY == 0 and rho_changes < _MAX_RHO_CHANGES
                    and it < max_iter // 2):
                if prim > _RHO_RATIO * dual:
                    rho *= _RHO_FACTOR
                    rho_changes += 1
                    for d in duals:
                        d /= _RHO_FACTOR
                elif dual > _RHO_RATIO * prim:
                    rho /= _RHO_FACTOR
                    rho_changes += 1
                    for d in duals:
                        d *= _RHO_FACTOR
        z = z_new

    objective = float((cost * z).sum())
    primal_residual = max(prim_n if math.isfinite(prim_n) else 0.0, feas if math.isfinite(feas) else 0.0)
    return SdpSolution(
        x=z,
        objective=objective,
        primal_residual=primal_residual,
        dual_residual=dual_n if math.isfinite(dual_n) else 0.0,
        iterations=it,
        status=status,
        residual_history=history,
    )
