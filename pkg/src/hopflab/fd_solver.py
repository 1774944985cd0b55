"""Finite-difference solver on the region above a convex boundary graph.

The domain is the part of the box [-R0, R0] x [0, height] above the graph
x2 = F(x1).  Second derivatives use central differences with
Shortley-Weller shortened arms where a neighbor lies across the curve; a
nonzero mixed coefficient is split as

    -a11 u_11 - a22 u_22 - 2 a12 u_12
        = -(a11 - |a12|) u_11 - (a22 - |a12|) u_22 - 2 |a12| u_dd

with u_dd the second derivative along the diagonal matching sign(a12),
again with shortened arms.  Under |a12| <= min(a11, a22) every
off-diagonal entry is nonpositive and the matrix is an M-matrix, which
gives the discrete maximum and comparison principles.  Drift terms are
upwinded.  Dirichlet data: u = 0 on the curve, caller-supplied values on
the top and lateral box sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .convex_geometry import (CURVE, EDGE, EXTERIOR, INTERIOR,
                              BoundaryProfile, DomainMask,
                              curve_crossing_fraction, domain_mask)
from .elliptic_operator import EllipticOperator, EmptyRegionError

__all__ = [
    "ConvergenceReport",
    "DiscreteDomain",
    "DiscreteSolution",
    "LinearSystem",
    "MisalignedHeightError",
    "NoConvergenceError",
    "StencilMonotonicityError",
    "convergence_study",
    "discretize",
    "dump_matrix",
    "dump_solution_csv",
    "dump_vector",
    "hopf_trace",
    "oscillation",
    "solve",
]


class StencilMonotonicityError(ValueError):
    """|a12| > min(a11, a22) somewhere: monotone 9-point split impossible."""


class NoConvergenceError(ArithmeticError):
    """Iterative solve missed the residual target."""


class MisalignedHeightError(ValueError):
    """Requested trace height is not a grid line."""


@dataclass(frozen=True)
class DiscreteDomain:
    """Masked grid plus the interior-node indexing used by the solver."""

    profile: BoundaryProfile
    mask: DomainMask
    index: np.ndarray        # (nx1, nx2) int, -1 off the unknowns
    interior_ij: np.ndarray  # (N, 2)

    @classmethod
    def build(cls, profile: BoundaryProfile, h: float,
              height: Optional[float] = None,
              min_column_nodes: int = 4) -> "DiscreteDomain":
        mask = domain_mask(profile, h, height=height,
                           min_column_nodes=min_column_nodes)
        interior = mask.cls == INTERIOR
        index = np.full(mask.cls.shape, -1, dtype=np.int64)
        ii, jj = np.nonzero(interior)
        index[ii, jj] = np.arange(ii.size)
        return cls(profile=profile, mask=mask, index=index,
                   interior_ij=np.column_stack((ii, jj)))

    @property
    def h(self) -> float:
        return self.mask.h

    @property
    def n_unknowns(self) -> int:
        return self.interior_ij.shape[0]


@dataclass(frozen=True)
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dom: Optional[DiscreteDomain] = None
    bc: Optional[Callable] = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, matrix, rhs, **meta) -> "LinearSystem":
        return cls(matrix=sp.csr_matrix(matrix),
                   rhs=np.asarray(rhs, dtype=float), meta=meta)

    def m_matrix_report(self, tol: float = 1e-10) -> dict:
        """Off-diagonal sign and weak row dominance diagnostics."""
        coo = self.matrix.tocoo()
        off = coo.data[coo.row != coo.col]
        max_off = float(off.max()) if off.size else 0.0
        rowsum = np.asarray(self.matrix.sum(axis=1)).ravel()
        return {
            "offdiag_ok": bool(max_off <= tol),
            "max_offdiag": max_off,
            "rowsum_ok": bool(rowsum.min() >= -tol / self.dom.h**2
                              if self.dom else rowsum.min() >= -tol),
            "min_rowsum": float(rowsum.min()),
        }


@dataclass(frozen=True)
class DiscreteSolution:
    values: np.ndarray       # grid-shaped; NaN outside the closed domain
    vec: np.ndarray
    residual_norm: float
    iterations: int
    dom: DiscreteDomain
    method: str


def _diagonal_fraction(profile, x1, x2, d1, d2, h, cls, i, j, di, dj):
    """Arm fraction toward the diagonal neighbor (i+di, j+dj)."""
    ni, nj = i + di, j + dj
    if cls[ni, nj] == INTERIOR or cls[ni, nj] == EDGE:
        return 1.0, cls[ni, nj]
    if cls[ni, nj] == CURVE:
        return 1.0, CURVE
    frac = curve_crossing_fraction(
        profile, (x1[i], x2[j]), (x1[ni], x2[nj]))
    return frac, EXTERIOR


def discretize(op: EllipticOperator, dom: DiscreteDomain,
               bc_top_side: Callable, source: Optional[Callable] = None,
               a12_tol: float = 1e-12) -> LinearSystem:
    """Assemble the sparse system for L u = source on the masked grid.

    ``bc_top_side(x1, x2)`` supplies Dirichlet data on the box top and
    lateral sides; the curve carries u = 0.  Raises
    ``StencilMonotonicityError`` when |a12| > min(a11, a22) at a node.
    """
    mask = dom.mask
    h = mask.h
    x1, x2 = mask.x1, mask.x2
    cls = mask.cls
    idx = dom.index
    ii = dom.interior_ij[:, 0]
    jj = dom.interior_ij[:, 1]
    N = ii.size

    X1 = x1[ii]
    X2 = x2[jj]
    a11, a22, a12 = (np.asarray(v, dtype=float)
                     for v in op.a_grid(X1, X2))
    b1, b2 = (np.asarray(v, dtype=float) for v in op.b_grid(X1, X2))
    a11 = np.broadcast_to(a11, (N,)).copy()
    a22 = np.broadcast_to(a22, (N,)).copy()
    a12 = np.broadcast_to(a12, (N,)).copy()
    b1 = np.broadcast_to(b1, (N,)).copy()
    b2 = np.broadcast_to(b2, (N,)).copy()

    bad = np.abs(a12) > np.minimum(a11, a22) + a12_tol
    if np.any(bad):
        k = int(np.nonzero(bad)[0][0])
        raise StencilMonotonicityError(
            f"|a12| = {abs(a12[k]):g} exceeds min(a11, a22) = "
            f"{min(a11[k], a22[k]):g} at ({X1[k]:g}, {X2[k]:g})")

    A1 = a11 - np.abs(a12)
    A2 = a22 - np.abs(a12)

    diag = np.zeros(N)
    rhs = np.zeros(N)
    rows: list = []
    cols: list = []
    vals: list = []

    def couple(k_arr, target_i, target_j, coef):
        """Route coefficients: unknown column, curve (u = 0) or bc value."""
        tcls = cls[target_i, target_j]
        unk = tcls == INTERIOR
        if np.any(unk):
            rows.append(k_arr[unk])
            cols.append(idx[target_i[unk], target_j[unk]])
            vals.append(coef[unk])
        bcn = tcls == EDGE
        if np.any(bcn):
            g = np.asarray(bc_top_side(x1[target_i[bcn]], x2[target_j[bcn]]),
                           dtype=float)
            rhs[k_arr[bcn]] -= coef[bcn] * g
        # CURVE neighbors carry u = 0: nothing to add

    karr = np.arange(N)

    # ---- axis second differences with Shortley-Weller arms -------------
    fw = mask.frac_w[ii, jj]
    fe = mask.frac_e[ii, jj]
    fs = mask.frac_s[ii, jj]
    alpha_w = np.where(np.isnan(fw), 1.0, fw)
    alpha_e = np.where(np.isnan(fe), 1.0, fe)
    alpha_s = np.where(np.isnan(fs), 1.0, fs)
    alpha_n = np.ones(N)  # the graph never crosses an upward arm

    cross_w = ~np.isnan(fw) & (cls[ii - 1, jj] == EXTERIOR)
    cross_e = ~np.isnan(fe) & (cls[ii + 1, jj] == EXTERIOR)
    cross_s = ~np.isnan(fs) & (cls[ii, jj - 1] == EXTERIOR)

    def second_diff(weight, a_minus, a_plus, di, dj, cross_minus, cross_plus):
        """-(weight) d^2/ds^2 along the axis (di, dj)."""
        denom = h * h
        c_m = -2.0 * weight / (a_minus * (a_minus + a_plus) * denom)
        c_p = -2.0 * weight / (a_plus * (a_minus + a_plus) * denom)
        diag_add = 2.0 * weight / (a_minus * a_plus * denom)
        diag[:] += diag_add
        keep_m = ~cross_minus & (np.abs(c_m) > 0.0)
        couple(karr[keep_m], ii[keep_m] + (-di), jj[keep_m] + (-dj), c_m[keep_m])
        keep_p = ~cross_plus & (np.abs(c_p) > 0.0)
        couple(karr[keep_p], ii[keep_p] + di, jj[keep_p] + dj, c_p[keep_p])
        # crossing arms end on the curve where u = 0: only the diagonal term

    second_diff(A1, alpha_w, alpha_e, 1, 0, cross_w, cross_e)
    second_diff(A2, alpha_s, alpha_n, 0, 1, cross_s, np.zeros(N, dtype=bool))

    # ---- mixed term: second difference along one diagonal --------------
    mixed = np.abs(a12) > 0.0
    if np.any(mixed):
        for k in np.nonzero(mixed)[0]:
            i, j = int(ii[k]), int(jj[k])
            s = 1 if a12[k] > 0.0 else -1
            # diagonal (s, 1) direction: "plus" arm toward (i+s, j+1),
            # "minus" arm toward (i-s, j-1); spacing sqrt(2) h
            fp, cls_p = _diagonal_fraction(dom.profile, x1, x2, None, None,
                                           h, cls, i, j, s, 1)
            fm, cls_m = _diagonal_fraction(dom.profile, x1, x2, None, None,
                                           h, cls, i, j, -s, -1)
            weight = 2.0 * abs(a12[k])
            denom = 2.0 * h * h  # (sqrt(2) h)^2
            diag[k] += 2.0 * weight / (fp * fm * denom)
            for frac, tcls, di, dj in ((fp, cls_p, s, 1), (fm, cls_m, -s, -1)):
                coef = -2.0 * weight / (frac * (fp + fm) * denom)
                ti, tj = i + di, j + dj
                if tcls == INTERIOR:
                    rows.append(np.array([k]))
                    cols.append(np.array([idx[ti, tj]]))
                    vals.append(np.array([coef]))
                elif tcls == EDGE:
                    g = float(bc_top_side(x1[ti], x2[tj]))
                    rhs[k] -= coef * g
                # CURVE or crossing: u = 0 there

    # ---- upwinded drift -------------------------------------------------
    up1 = b1 > 0.0
    if np.any(np.abs(b1) > 0.0):
        # positive b1: backward difference (u_P - u_W)/(alpha_w h)
        c = np.where(up1, b1 / (alpha_w * h), 0.0)
        diag[:] += c
        keep = up1 & ~cross_w & (np.abs(c) > 0)
        couple(karr[keep], ii[keep] - 1, jj[keep], -c[keep])
        # negative b1: forward difference (u_E - u_P)/(alpha_e h)
        c = np.where(~up1, -b1 / (alpha_e * h), 0.0)
        diag[:] += c
        keep = ~up1 & ~cross_e & (np.abs(c) > 0)
        couple(karr[keep], ii[keep] + 1, jj[keep], -c[keep])
    up2 = b2 > 0.0
    if np.any(np.abs(b2) > 0.0):
        c = np.where(up2, b2 / (alpha_s * h), 0.0)
        diag[:] += c
        keep = up2 & ~cross_s & (np.abs(c) > 0)
        couple(karr[keep], ii[keep], jj[keep] - 1, -c[keep])
        c = np.where(~up2, -b2 / (alpha_n * h), 0.0)
        diag[:] += c
        keep = ~up2 & (np.abs(c) > 0)
        couple(karr[keep], ii[keep], jj[keep] + 1, -c[keep])

    if source is not None:
        rhs += np.asarray(source(X1, X2), dtype=float)

    rows.append(karr)
    cols.append(karr)
    vals.append(diag)
    matrix = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(N, N))
    meta = {"h": h, "operator": op.preset or "custom",
            "operator_params": dict(op.params), "unknowns": int(N)}
    return LinearSystem(matrix=matrix, rhs=rhs, dom=dom, bc=bc_top_side,
                        meta=meta)


def solve(system: LinearSystem, tol: float = 1e-10,
          max_iter: Optional[int] = None,
          direct_threshold: int = 600_000) -> DiscreteSolution:
    """Solve the assembled system.

    Systems up to ``direct_threshold`` unknowns go through a sparse LU
    factorization; larger ones use BiCGSTAB with Jacobi preconditioning
    (relative residual <= tol), raising ``NoConvergenceError`` on failure.
    Deterministic for fixed inputs either way."""
    A = system.matrix.tocsc()
    b = system.rhs
    N = A.shape[0]
    iterations = 0
    if N <= direct_threshold:
        x = spla.splu(A, permc_spec="COLAMD").solve(b)
        method = "splu"
    else:
        diag = A.diagonal()
        M = spla.LinearOperator((N, N), matvec=lambda v: v / diag)
        count = [0]

        def cb(_):
            count[0] += 1

        maxiter = max_iter or 20000
        x, info = spla.bicgstab(A, b, rtol=tol, atol=0.0, M=M,
                                maxiter=maxiter, callback=cb)
        iterations = count[0]
        if info != 0:
            res = float(np.linalg.norm(b - A @ x) /
                        max(np.linalg.norm(b), 1e-300))
            raise NoConvergenceError(
                f"BiCGSTAB stopped (info={info}) after {iterations} "
                f"iterations, relative residual {res:.3e}")
        method = "bicgstab+jacobi"
    res = float(np.linalg.norm(b - A @ x) / max(np.linalg.norm(b), 1e-300))

    dom = system.dom
    if dom is None:
        values = x.copy()
    else:
        mask = dom.mask
        values = np.full(mask.cls.shape, np.nan)
        values[dom.interior_ij[:, 0], dom.interior_ij[:, 1]] = x
        values[mask.cls == CURVE] = 0.0
        if system.bc is not None:
            ei, ej = np.nonzero(mask.cls == EDGE)
            values[ei, ej] = np.asarray(
                system.bc(mask.x1[ei], mask.x2[ej]), dtype=float)
    return DiscreteSolution(values=values, vec=x, residual_norm=res,
                            iterations=iterations, dom=dom, method=method)


# ----------------------------------------------------------------------
# extraction
# ----------------------------------------------------------------------

def hopf_trace(sol: DiscreteSolution, heights: Sequence[float]) -> np.ndarray:
    """u(0, x2)/x2 at grid-aligned heights on the x1 = 0 column.

    Exact nodal division, no interpolation.  Heights must be positive grid
    lines with a defined value (interior or box top)."""
    dom = sol.dom
    mask = dom.mask
    h = mask.h
    col = mask.center_col
    out = np.empty(len(heights))
    for m, x2 in enumerate(heights):
        j = int(round(x2 / h))
        if abs(j * h - x2) > 1e-9 * max(1.0, abs(x2)) or j <= 0 \
                or j >= mask.x2.size:
            raise MisalignedHeightError(f"height {x2} is not a grid line")
        v = sol.values[col, j]
        if not np.isfinite(v):
            raise MisalignedHeightError(f"no solution value at (0, {x2})")
        out[m] = v / mask.x2[j]
    return out


def oscillation(sol: DiscreteSolution, profile: BoundaryProfile,
                r: float, noise_floor_cells: int = 2) -> float:
    """max - min of u(x)/x2 over interior nodes of the cylinder
    {|x1| < r, 0 < x2 < r}, excluding rows x2 < noise_floor_cells*h where
    the quotient amplifies discretization noise."""
    if r > profile.R0 + 1e-12:
        raise ValueError(f"r = {r} exceeds the patch radius {profile.R0}")
    dom = sol.dom
    mask = dom.mask
    X1 = mask.x1[:, None]
    X2 = mask.x2[None, :]
    region = ((mask.cls == INTERIOR) & (np.abs(X1) < r) & (X2 < r)
              & (X2 >= noise_floor_cells * mask.h - 1e-15))
    if not np.any(region):
        raise EmptyRegionError(f"no interior nodes in the cylinder r = {r}")
    quot = sol.values[region] / np.broadcast_to(X2, mask.cls.shape)[region]
    return float(quot.max() - quot.min())


# ----------------------------------------------------------------------
# convergence study
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceReport:
    h_list: tuple
    errors: tuple
    observed_order: Optional[float]
    exact: bool
    reference: str


def convergence_study(op: EllipticOperator, profile: BoundaryProfile,
                      bc: Callable, h_list: Sequence[float],
                      exact: Optional[Callable] = None,
                      height: Optional[float] = None) -> ConvergenceReport:
    """Observed order from max-norm errors across grids.

    With ``exact`` the error is max |u_h - exact| over interior nodes;
    otherwise each grid is compared against its once-refined solve
    (Richardson-style difference).  Errors below 1e-9 everywhere are
    reported as exact reproduction (order undefined)."""
    if len(h_list) < 2 or np.any(np.diff(h_list) >= 0.0):
        raise ValueError("h_list must be strictly decreasing with >= 2 entries")
    errors = []
    for h in h_list:
        dom = DiscreteDomain.build(profile, h, height=height)
        sol = solve(discretize(op, dom, bc))
        if exact is not None:
            ii, jj = dom.interior_ij[:, 0], dom.interior_ij[:, 1]
            ref = np.asarray(exact(dom.mask.x1[ii], dom.mask.x2[jj]),
                             dtype=float)
            err = float(np.abs(sol.vec - ref).max())
        else:
            dom2 = DiscreteDomain.build(profile, h / 2.0, height=height)
            sol2 = solve(discretize(op, dom2, bc))
            ii, jj = dom.interior_ij[:, 0], dom.interior_ij[:, 1]
            fine = sol2.values[2 * ii, 2 * jj]
            ok = np.isfinite(fine)
            err = float(np.abs(sol.vec[ok] - fine[ok]).max())
        errors.append(err)
    errors_arr = np.asarray(errors)
    if np.all(errors_arr < 1e-9):
        return ConvergenceReport(tuple(h_list), tuple(errors), None, True,
                                 "exact" if exact else "richardson")
    slope = float(np.polyfit(np.log(np.asarray(h_list)),
                             np.log(np.maximum(errors_arr, 1e-300)), 1)[0])
    return ConvergenceReport(tuple(h_list), tuple(errors), slope, False,
                             "exact" if exact else "richardson")


# ----------------------------------------------------------------------
# dumps
# ----------------------------------------------------------------------

def dump_matrix(path, matrix: sp.spmatrix) -> None:
    """Coordinate text format: row, col, value per line."""
    coo = matrix.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{int(r)} {int(c)} {float(v)!r}\n")


def dump_vector(path, vec: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in np.asarray(vec).ravel():
            fh.write(f"{float(v)!r}\n")


def dump_solution_csv(path, sol: DiscreteSolution) -> None:
    """Solution snapshot as CSV rows (x1, x2, u) over defined nodes."""
    mask = sol.dom.mask
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x1,x2,u\n")
        for i in range(mask.x1.size):
            for j in range(mask.x2.size):
                v = sol.values[i, j]
                if np.isfinite(v):
                    fh.write(f"{float(mask.x1[i])!r},{float(mask.x2[j])!r},"
                             f"{float(v)!r}\n")
