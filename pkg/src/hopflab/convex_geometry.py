"""Convex boundary graphs and the slope moduli delta and delta1.

The boundary near the origin is the graph x_n = F(x') of a convex
nonnegative F with F(0) = 0, described either radially (F = f(|x'|)) or as
a maximum of affine pieces.  The two moduli

    delta(r)  = max over |x'| <= r of F(x')/|x'|,
    delta1(r) = max over |x'| <= r of |grad F| (subgradient norms at kinks)

are sandwiched: delta(r) <= delta1(r) <= 2 delta(2r).  The module also
builds the local frame at a boundary point realizing delta(r), checks the
interior ball used by the oscillation-decay argument, and rasterizes the
region above the graph for the finite-difference solver.

For any convex F with F(0) = 0 the ratio F(rho u)/rho is nondecreasing
along every ray, so delta(r) is always realized on the sphere |x'| = r;
for max-affine profiles this gives the exact value
max over pieces of (|p_i| + c_i/r).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .modulus import Verdict, from_table, preset_modulus

__all__ = [
    "BallInclusionReport",
    "BoundaryProfile",
    "DomainError",
    "DomainMask",
    "ExtremalFrame",
    "FrameMismatchError",
    "MaxAffineProfile",
    "RadialProfile",
    "ResolutionError",
    "SandwichReport",
    "ball_inclusion_check",
    "boundary_modulus",
    "curve_crossing_fraction",
    "delta",
    "delta1",
    "domain_mask",
    "extremal_frame",
    "maxaffine_from_csv",
    "preset_profile",
    "profile_height",
    "sandwich_check",
    "validate_profile",
]


class DomainError(ValueError):
    """Scale argument outside (0, R0] or a related domain violation."""


class ResolutionError(ValueError):
    """Grid too coarse to resolve the domain above the graph."""


class FrameMismatchError(ValueError):
    """Frame inconsistent with the profile/scale it claims to describe."""


# ----------------------------------------------------------------------
# profiles
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """F(x') = f(|x'|) with f convex nondecreasing, f(0) = 0."""

    f: Callable[[np.ndarray], np.ndarray]
    R0: float
    ambient_dim: int = 2
    df: Optional[Callable[[float], float]] = None  # closed-form derivative
    preset: Optional[str] = None

    def height(self, x1):
        """Graph height over planar abscissae (ambient_dim = 2)."""
        out = np.asarray(self.f(np.abs(np.asarray(x1, dtype=float))), dtype=float)
        return float(out) if out.ndim == 0 else out

    def left_derivative(self, r: float) -> float:
        if self.df is not None:
            return float(self.df(r))
        h = max(r * 1e-7, 1e-13)
        return (float(self.f(r)) - float(self.f(r - h))) / h


@dataclass(frozen=True)
class MaxAffineProfile:
    """F(x') = max over pieces of (p_i . x' + c_i), with max c_i = 0."""

    slopes: np.ndarray   # (k, n-1)
    offsets: np.ndarray  # (k,)
    R0: float
    ambient_dim: int = 2
    preset: Optional[str] = None

    def __post_init__(self):
        slopes = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        offsets = np.asarray(self.offsets, dtype=float).reshape(-1)
        if slopes.shape[0] != offsets.shape[0]:
            raise ValueError("slopes and offsets disagree on piece count")
        if slopes.shape[1] != self.ambient_dim - 1:
            raise ValueError("slope dimension must be ambient_dim - 1")
        if abs(offsets.max()) > 1e-12:
            raise ValueError("max offset must be 0 so that F(0) = 0")
        object.__setattr__(self, "slopes", slopes)
        object.__setattr__(self, "offsets", offsets)

    def height(self, x1):
        """Graph height over planar abscissae (ambient_dim = 2)."""
        if self.ambient_dim != 2:
            raise ValueError("height(x1) is the planar interface; "
                             "use profile_height for general points")
        x = np.asarray(x1, dtype=float)
        vals = x[..., None] * self.slopes[:, 0] + self.offsets
        out = vals.max(axis=-1)
        return float(out) if out.ndim == 0 else out


BoundaryProfile = Union[RadialProfile, MaxAffineProfile]


def profile_height(profile: BoundaryProfile, xprime) -> float:
    """F at a single point x' of any ambient dimension."""
    xp = np.atleast_1d(np.asarray(xprime, dtype=float))
    if isinstance(profile, RadialProfile):
        return float(profile.f(float(np.linalg.norm(xp))))
    vals = profile.slopes @ xp + profile.offsets
    return float(vals.max())


def preset_profile(spec: str, R0: float = 0.5, ambient_dim: int = 2) -> BoundaryProfile:
    """Boundary profile presets.

    "flat", "cone:<c>", "power:<alpha>" (f = rho^(1+alpha)),
    "log1" (f = rho/ln(e R0/rho)), "log2" (f = rho/ln(e R0/rho)^2),
    "wedge:<theta>" (planar cone of opening angle theta < pi).
    """
    if not 0.0 < R0 <= 1.0:
        raise ValueError(f"patch radius R0 must lie in (0, 1], got {R0}")
    name, _, arg = spec.partition(":")
    if name == "flat":
        return RadialProfile(f=lambda rho: np.zeros_like(np.asarray(rho, float)),
                             df=lambda r: 0.0, R0=R0,
                             ambient_dim=ambient_dim, preset=spec)
    if name == "cone":
        c = float(arg)
        if c < 0:
            raise ValueError("cone slope must be nonnegative")
        return RadialProfile(f=lambda rho, c=c: c * np.asarray(rho, float),
                             df=lambda r, c=c: c, R0=R0,
                             ambient_dim=ambient_dim, preset=spec)
    if name == "wedge":
        theta = float(arg) if arg else 2.0 * math.pi / 3.0
        if not 0.0 < theta < math.pi:
            raise ValueError("wedge opening angle must lie in (0, pi)")
        c = 1.0 / math.tan(theta / 2.0)
        return RadialProfile(f=lambda rho, c=c: c * np.asarray(rho, float),
                             df=lambda r, c=c: c, R0=R0,
                             ambient_dim=2, preset=spec)
    if name == "power":
        alpha = float(arg)
        if not 0.0 < alpha <= 1.0:
            raise ValueError("power profile needs alpha in (0, 1]")
        return RadialProfile(
            f=lambda rho, a=alpha: np.power(np.asarray(rho, float), 1.0 + a),
            df=lambda r, a=alpha: (1.0 + a) * r**a,
            R0=R0, ambient_dim=ambient_dim, preset=spec)
    if name == "log1":
        def _f(rho, R0=R0):
            rho = np.asarray(rho, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                L = 1.0 + np.log(R0) - np.log(rho)
                out = np.where(rho > 0.0, rho / L, 0.0)
            return out

        def _df(r, R0=R0):
            L = 1.0 + math.log(R0) - math.log(r)
            return 1.0 / L + 1.0 / L**2

        return RadialProfile(f=_f, df=_df, R0=R0,
                             ambient_dim=ambient_dim, preset=spec)
    if name == "log2":
        def _f(rho, R0=R0):
            rho = np.asarray(rho, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                L = 1.0 + np.log(R0) - np.log(rho)
                out = np.where(rho > 0.0, rho / L**2, 0.0)
            return out

        def _df(r, R0=R0):
            L = 1.0 + math.log(R0) - math.log(r)
            return 1.0 / L**2 + 2.0 / L**3

        return RadialProfile(f=_f, df=_df, R0=R0,
                             ambient_dim=ambient_dim, preset=spec)
    raise ValueError(f"unknown profile preset {spec!r}")


def maxaffine_from_csv(path, R0: float = 0.5, ambient_dim: int = 2) -> MaxAffineProfile:
    """Load a max-affine profile from CSV rows (p_1, ..., p_{n-1}, c)."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                if not rows:
                    continue
                raise ValueError(f"malformed CSV row: {line!r}")
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != ambient_dim:
        raise ValueError("each row must hold ambient_dim-1 slopes plus an offset")
    return MaxAffineProfile(slopes=arr[:, :-1], offsets=arr[:, -1],
                            R0=R0, ambient_dim=ambient_dim)


def validate_profile(profile: BoundaryProfile, samples: int = 200,
                     seed: int = 0) -> None:
    """Sampled invariant checks: F(0) = 0, F >= 0 on the patch, midpoint
    convexity, and (radial) nondecreasing difference quotients."""
    rng = np.random.default_rng(seed)
    d = profile.ambient_dim - 1
    if abs(profile_height(profile, np.zeros(d))) > 1e-12:
        raise ValueError("F(0) must be 0")
    pts = rng.uniform(-profile.R0, profile.R0, size=(samples, d))
    pts = pts[np.linalg.norm(pts, axis=1) <= profile.R0]
    vals = np.array([profile_height(profile, p) for p in pts])
    if np.any(vals < -1e-12):
        raise ValueError("F must be nonnegative on the patch")
    half = len(pts) // 2
    for x, z in zip(pts[:half], pts[half:2 * half]):
        lhs = profile_height(profile, (x + z) / 2.0)
        rhs = 0.5 * (profile_height(profile, x) + profile_height(profile, z))
        if lhs > rhs + 1e-12:
            raise ValueError("midpoint convexity fails on a sampled pair")
    if isinstance(profile, RadialProfile):
        rho = np.linspace(0.0, profile.R0, 64)
        f = np.array([float(profile.f(x)) for x in rho])
        quot = np.diff(f) / np.diff(rho)
        if np.any(np.diff(quot) < -1e-10):
            raise ValueError("radial f has decreasing difference quotients")


# ----------------------------------------------------------------------
# delta and delta1
# ----------------------------------------------------------------------

def _check_scale(profile: BoundaryProfile, r: float, limit: float = None):
    limit = profile.R0 if limit is None else limit
    if not 0.0 < r <= limit + 1e-12:
        raise DomainError(f"scale r = {r} outside (0, {limit}]")


def delta(profile: BoundaryProfile, r: float) -> float:
    """Boundary slope modulus: max over |x'| <= r of F(x')/|x'|."""
    _check_scale(profile, r)
    if isinstance(profile, RadialProfile):
        return float(profile.f(r)) / r
    vals = np.linalg.norm(profile.slopes, axis=1) + profile.offsets / r
    return float(vals.max())


def delta1(profile: BoundaryProfile, r: float) -> float:
    """Gradient modulus: max subgradient norm of F over |x'| <= r."""
    _check_scale(profile, r)
    if isinstance(profile, RadialProfile):
        return profile.left_derivative(r)
    active = _active_pieces(profile, r)
    return float(np.linalg.norm(profile.slopes[active], axis=1).max())


def _active_pieces(profile: MaxAffineProfile, r: float) -> np.ndarray:
    """Boolean mask of pieces that attain F somewhere in the closed ball."""
    p, c = profile.slopes, profile.offsets
    k, d = p.shape
    if d == 1:
        # exact: piece i is active on the interval cut by the halflines
        # (p_i - p_j) x >= c_j - c_i
        active = np.zeros(k, dtype=bool)
        for i in range(k):
            lo, hi = -r, r
            ok = True
            for j in range(k):
                if i == j:
                    continue
                a = p[i, 0] - p[j, 0]
                b = c[j] - c[i]
                if a > 0.0:
                    lo = max(lo, b / a)
                elif a < 0.0:
                    hi = min(hi, b / a)
                elif b > 1e-15:  # parallel piece strictly above
                    ok = False
                    break
            active[i] = ok and lo <= hi + 1e-15
        return active
    # sampled activity detection on a direction/radius grid plus each
    # piece's dominant point r p_i/|p_i| (the latter guarantees that the
    # piece realizing delta is detected, hence delta <= delta1)
    pts = [np.zeros(d)]
    norms = np.linalg.norm(p, axis=1)
    for i in range(k):
        if norms[i] > 0.0:
            pts.append(r * p[i] / norms[i])
    rng = np.random.default_rng(12345)
    dirs = rng.standard_normal((256, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    for rad in np.geomspace(r / 64.0, r, 8):
        pts.extend(rad * dirs)
    pts = np.asarray(pts)
    vals = pts @ p.T + c[None, :]
    best = vals.max(axis=1, keepdims=True)
    tol = 1e-12 * max(1.0, float(np.abs(best).max()))
    return np.any(vals >= best - tol, axis=0)


@dataclass(frozen=True)
class SandwichReport:
    r: float
    delta_r: float
    delta1_r: float
    delta_2r: float
    lower_ok: bool   # delta(r) <= delta1(r)
    upper_ok: bool   # delta1(r) <= 2 delta(2r)
    lower_slack: float
    upper_slack: float

    @property
    def both_ok(self) -> bool:
        return self.lower_ok and self.upper_ok


def sandwich_check(profile: BoundaryProfile, r: float,
                   tol: float = 1e-10) -> SandwichReport:
    """Verify delta(r) <= delta1(r) <= 2 delta(2r) and report slacks."""
    if 2.0 * r > profile.R0 + 1e-12:
        raise DomainError(f"need 2r <= R0, got r = {r}, R0 = {profile.R0}")
    d = delta(profile, r)
    d1 = delta1(profile, r)
    d2 = delta(profile, 2.0 * r)
    return SandwichReport(
        r=r, delta_r=d, delta1_r=d1, delta_2r=d2,
        lower_ok=bool(d <= d1 + tol),
        upper_ok=bool(d1 <= 2.0 * d2 + tol),
        lower_slack=d1 - d,
        upper_slack=2.0 * d2 - d1,
    )


# ----------------------------------------------------------------------
# extremal frame and interior ball
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ExtremalFrame:
    """Local orthogonal frame at a boundary point realizing delta(r).

    ``rotation`` maps displacements to frame coordinates, y = Q (x - x_star).
    The y_1 axis points along the outward horizontal direction projected
    onto the supporting hyperplane; the last axis points into the domain."""

    x_star: np.ndarray
    phi: float
    rotation: np.ndarray
    r: float
    degenerate: bool = False

    @property
    def n(self) -> int:
        return self.x_star.size

    def to_x(self, y):
        return self.x_star + np.asarray(y, dtype=float) @ self.rotation


def extremal_frame(profile: BoundaryProfile, r: float) -> ExtremalFrame:
    """Frame at x* on the sphere |x'| = r where F(x')/|x'| is maximal.

    tan(phi) is the supporting-hyperplane slope at x* (a subgradient norm),
    so tan(phi) <= delta1(r).  A flat boundary (delta(r) = 0) degenerates
    to the identity frame with phi = 0."""
    _check_scale(profile, r, limit=profile.R0 / 2.0)
    n = profile.ambient_dim
    d = delta(profile, r)
    if isinstance(profile, RadialProfile):
        u = np.zeros(n - 1)
        u[0] = 1.0
        slope = profile.left_derivative(r) if d > 0.0 else 0.0
    else:
        norms = np.linalg.norm(profile.slopes, axis=1)
        i_star = int(np.argmax(norms + profile.offsets / r))
        if norms[i_star] > 0.0:
            u = profile.slopes[i_star] / norms[i_star]
        else:
            u = np.zeros(n - 1)
            u[0] = 1.0
        slope = norms[i_star]
    if d <= 0.0:
        x_star = np.concatenate((r * u, [0.0]))
        return ExtremalFrame(x_star=x_star, phi=0.0, rotation=np.eye(n),
                             r=r, degenerate=True)
    x_star = np.concatenate((r * u, [r * d]))
    phi = math.atan(slope)
    cos, sin = math.cos(phi), math.sin(phi)
    rows = np.zeros((n, n))
    rows[0, :n - 1] = cos * u
    rows[0, n - 1] = sin
    rows[n - 1, :n - 1] = -sin * u
    rows[n - 1, n - 1] = cos
    if n > 2:
        # complete the tangential block with an orthonormal complement of u
        basis = np.linalg.svd(u[None, :])[2][1:]
        rows[1:n - 1, :n - 1] = basis
    return ExtremalFrame(x_star=x_star, phi=phi, rotation=rows, r=r)


@dataclass(frozen=True)
class BallInclusionReport:
    included: bool
    margin: float
    gamma: float
    rho0: float
    cos_phi: float
    z0: np.ndarray
    smallness_ok: bool
    sufficient_condition: bool  # 16 delta(2r) < gamma (2 cos phi - 1)


def ball_inclusion_check(profile: BoundaryProfile, frame: ExtremalFrame,
                         nu: float, samples: int = 512,
                         seed: int = 0) -> BallInclusionReport:
    """Check that the ball B_rho0(z0) stays above the graph.

    In frame coordinates z0 = (r/2, 0, ..., 0, gamma r/4) with
    gamma = nu/sqrt(n-1) and rho0 = gamma r/8.  The center and sampled
    points of the boundary sphere are mapped to x-coordinates and tested
    against x_n > F(x'); the report carries the worst margin.  Whenever
    16 delta(2r) < gamma (2 cos phi - 1) the result is guaranteed True.
    The smallness premise delta1(R0) <= 3/4 is reported but the check
    still executes when it fails."""
    if not 0.0 < nu <= 1.0:
        raise ValueError("nu must lie in (0, 1]")
    n = frame.n
    r = frame.r
    if not 0.0 < r <= profile.R0 / 2.0 + 1e-12:
        raise FrameMismatchError("frame scale exceeds R0/2")
    expected_xn = r * delta(profile, r)
    if abs(frame.x_star[-1] - expected_xn) > 1e-9 * max(1.0, expected_xn):
        raise FrameMismatchError("frame does not realize r*delta(r)")
    gamma = nu / math.sqrt(n - 1)
    rho0 = gamma * r / 8.0
    z0_y = np.zeros(n)
    z0_y[0] = r / 2.0
    z0_y[-1] = gamma * r / 4.0
    z0_x = frame.to_x(z0_y)

    rng = np.random.default_rng(seed)
    if n == 2:
        ang = np.linspace(0.0, 2.0 * math.pi, samples, endpoint=False)
        dirs = np.column_stack((np.cos(ang), np.sin(ang)))
    else:
        dirs = rng.standard_normal((samples, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = np.vstack((z0_x[None, :], z0_x[None, :] + rho0 * dirs))
    heights = np.array([profile_height(profile, p[:-1]) for p in pts])
    margins = pts[:, -1] - heights
    margin = float(margins.min())

    cos_phi = math.cos(frame.phi)
    sufficient = 16.0 * delta(profile, 2.0 * r) < gamma * (2.0 * cos_phi - 1.0)
    return BallInclusionReport(
        included=bool(margin > 0.0),
        margin=margin,
        gamma=gamma,
        rho0=rho0,
        cos_phi=cos_phi,
        z0=z0_x,
        smallness_ok=bool(delta1(profile, profile.R0) <= 0.75),
        sufficient_condition=bool(sufficient),
    )


# ----------------------------------------------------------------------
# rasterization
# ----------------------------------------------------------------------

EXTERIOR, INTERIOR, CURVE, EDGE = 0, 1, 2, 3


@dataclass(frozen=True)
class DomainMask:
    """Node classification of the box [-R0, R0] x [0, height].

    ``cls`` holds EXTERIOR/INTERIOR/CURVE/EDGE per node, indexed [i, j]
    for column i, row j.  ``frac_w/e/s`` store, for interior nodes whose
    west/east/south neighbor lies across the graph, the fractional arm
    length in (0, 1] to the crossing; NaN elsewhere."""

    h: float
    x1: np.ndarray
    x2: np.ndarray
    cls: np.ndarray
    frac_w: np.ndarray
    frac_e: np.ndarray
    frac_s: np.ndarray

    @property
    def shape(self):
        return self.cls.shape

    @property
    def center_col(self) -> int:
        return (self.x1.size - 1) // 2


def curve_crossing_fraction(profile: BoundaryProfile, p_from, p_to,
                            tol: float = 1e-12) -> float:
    """Fraction s in (0, 1] along the segment p_from -> p_to at which it
    crosses the graph x2 = F(x1).  p_from must lie strictly above the
    graph and p_to on or below it.  Bisection to |ds| <= tol."""
    x0, y0 = float(p_from[0]), float(p_from[1])
    x1, y1 = float(p_to[0]), float(p_to[1])

    def g(s: float) -> float:
        return (y0 + s * (y1 - y0)) - profile_height(profile, x0 + s * (x1 - x0))

    if g(0.0) <= 0.0:
        raise ValueError("segment start must lie above the graph")
    if g(1.0) > 0.0:
        raise ValueError("segment end must lie on or below the graph")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return max(hi, tol)


def domain_mask(profile: BoundaryProfile, h: float,
                height: Optional[float] = None,
                min_column_nodes: int = 4) -> DomainMask:
    """Classify grid nodes of the solver box against the graph.

    The x1 = 0 column is a grid line; R0 and the box height must be
    integer multiples of h.  Fractional distances to the curve are exact
    along the vertical axis and located by bisection along the horizontal
    axis (tolerance 1e-12 per unit arm)."""
    if profile.ambient_dim != 2:
        raise ValueError("rasterization supports planar profiles only")
    R0 = profile.R0
    height = R0 if height is None else height
    M = int(round(R0 / h))
    P = int(round(height / h))
    if M < 2 or P < 2 or abs(M * h - R0) > 1e-9 * h or abs(P * h - height) > 1e-9 * h:
        raise ResolutionError("R0 and height must be integer multiples of h")
    x1 = (np.arange(2 * M + 1) - M) * h
    x2 = np.arange(P + 1) * h
    F = np.asarray(profile.height(x1), dtype=float)
    tol = 1e-12

    X2 = x2[None, :]
    Fc = F[:, None]
    cls = np.where(X2 > Fc + tol, INTERIOR,
                   np.where(np.abs(X2 - Fc) <= tol, CURVE, EXTERIOR)).astype(np.int8)
    edge = np.zeros_like(cls, dtype=bool)
    edge[0, :] = True
    edge[-1, :] = True
    edge[:, -1] = True
    cls[edge & (cls == INTERIOR)] = EDGE

    M_col = M
    interior_center = int(np.count_nonzero(cls[M_col, :] == INTERIOR))
    if interior_center < min_column_nodes:
        raise ResolutionError(
            f"only {interior_center} interior nodes on the x1 = 0 column; "
            f"need at least {min_column_nodes}")

    frac_w = np.full(cls.shape, np.nan)
    frac_e = np.full(cls.shape, np.nan)
    frac_s = np.full(cls.shape, np.nan)
    interior = cls == INTERIOR
    crossed = (cls == EXTERIOR) | (cls == CURVE)

    # south arms have the exact fraction (x2 - F)/h
    s_mask = interior.copy()
    s_mask[:, 1:] &= crossed[:, :-1]
    s_mask[:, 0] = False
    ii, jj = np.nonzero(s_mask)
    frac_s[ii, jj] = np.clip((x2[jj] - F[ii]) / h, tol, 1.0)

    # horizontal arms need a root find against the graph
    w_mask = interior.copy()
    w_mask[1:, :] &= crossed[:-1, :]
    w_mask[0, :] = False
    for i, j in zip(*np.nonzero(w_mask)):
        if cls[i - 1, j] == CURVE:
            frac_w[i, j] = 1.0
        else:
            frac_w[i, j] = curve_crossing_fraction(
                profile, (x1[i], x2[j]), (x1[i - 1], x2[j]))
    e_mask = interior.copy()
    e_mask[:-1, :] &= crossed[1:, :]
    e_mask[-1, :] = False
    for i, j in zip(*np.nonzero(e_mask)):
        if cls[i + 1, j] == CURVE:
            frac_e[i, j] = 1.0
        else:
            frac_e[i, j] = curve_crossing_fraction(
                profile, (x1[i], x2[j]), (x1[i + 1], x2[j]))

    return DomainMask(h=h, x1=x1, x2=x2, cls=cls,
                      frac_w=frac_w, frac_e=frac_e, frac_s=frac_s)


# ----------------------------------------------------------------------
# boundary modulus for the decay experiment
# ----------------------------------------------------------------------

def boundary_modulus(profile: BoundaryProfile):
    """Normalized slope modulus t -> delta(t R0)/delta(R0) plus a Dini hint.

    Returns (modulus or None, verdict hint).  Flat boundaries have a zero
    modulus (trivially Dini).  Cones and wedges have delta bounded away
    from zero; the domain then sits inside a planar wedge, the regime in
    which the normal derivative already degenerates (hint NonDini)."""
    preset = getattr(profile, "preset", None) or ""
    name = preset.partition(":")[0]
    if name == "flat":
        return None, Verdict.DINI
    if name in ("cone", "wedge"):
        return None, Verdict.NON_DINI
    if name in ("power", "log1", "log2"):
        sigma = preset_modulus(preset if name == "power" else name)
        return sigma, sigma.dini_flag
    d_R0 = delta(profile, profile.R0)
    if d_R0 <= 0.0:
        return None, Verdict.DINI
    ts = np.geomspace(1e-8, 1.0, 200)
    vals = np.array([delta(profile, t * profile.R0) for t in ts]) / d_R0
    table = from_table(np.concatenate(([0.0], ts)),
                       np.concatenate(([0.0], np.maximum.accumulate(vals))))
    return table, None
