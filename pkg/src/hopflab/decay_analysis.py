"""Dyadic oscillation-decay experiments and the degeneracy verdict.

One solve per experiment; the quotient u(x)/x2 is then examined on the
shrinking cylinders P_{r_k}, r_k = 2^-k R0.  The decay estimate couples
scales a factor 8 apart:

    osc over P_{r/4} of u/x2  <=  (1 - kappa delta(r)) osc over P_{2r},

read off measured levels as pairs (k, k+3) with r = r_k/2.  kappa is
fitted as the largest constant consistent with all usable pairs.  The
damping product prod (1 - kappa delta(r_j/2)) over the base-8 radii
r_j = 8^-j R0 diverges to zero exactly when delta fails the Dini
condition, which is the mechanism that kills the normal derivative.

The verdict combines two independent signals: the trend of the Hopf trace
u(0, r_k)/r_k over the last four levels, and the Dini classification of
the boundary modulus.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import convex_geometry as geo
from . import fd_solver as fds
from .elliptic_operator import EmptyRegionError, preset_operator
from .modulus import (Modulus, Verdict, dini_classify, dini_integral,
                      _panel_integral)

__all__ = [
    "AdjustK0Error",
    "ContrastReport",
    "DecayReport",
    "HopfExperiment",
    "HopfVerdict",
    "ProductReport",
    "RecursionReport",
    "ScaleStarvedError",
    "boundary_data",
    "contrast_suite",
    "growth_recursion_bound",
    "product_bound",
    "report_csv",
    "report_summary",
    "run_experiment",
    "sector_harmonic",
]


class ScaleStarvedError(ValueError):
    """Fewer than three usable dyadic levels on the grid."""


class AdjustK0Error(ValueError):
    """gamma_1 > 1/2; carries the minimal admissible k0 when one exists."""

    def __init__(self, message: str, minimal_k0: Optional[int] = None):
        super().__init__(message)
        self.minimal_k0 = minimal_k0


class HopfVerdict(str, enum.Enum):
    HOLDS = "HopfHolds"
    DEGENERATES = "HopfDegenerates"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self) -> str:  # pragma: no cover
        return self.value


@dataclass(frozen=True)
class HopfExperiment:
    """Configuration of one decay experiment.

    Radii are r_k = 2^-k R0 for k = 0..K; the smallest cylinder must hold
    at least 8 grid cells (2^-K R0 >= 8h)."""

    profile: str
    operator: str = "laplace"
    R0: float = 0.5
    K: int = 4
    h: float = 2.0**-7
    bc: str = "linear"
    seed: int = 0

    def validate(self) -> None:
        if self.K < 1:
            raise ValueError("dyadic depth K must be at least 1")
        if 2.0 ** -self.K * self.R0 < 8.0 * self.h - 1e-12:
            raise ValueError(
                f"smallest cylinder 2^-K R0 = {2.0**-self.K * self.R0:g} "
                f"holds fewer than 8 cells of h = {self.h:g}")


def sector_harmonic(theta: float) -> Callable:
    """Harmonic function rho^(pi/theta) sin(pi phi/theta) vanishing on both
    edges of the planar sector of opening theta, symmetric about the x2
    axis.  On the x1 = 0 ray it equals x2^(pi/theta)."""
    beta0 = math.pi / 2.0 - theta / 2.0

    def u(X1, X2):
        X1 = np.asarray(X1, dtype=float)
        X2 = np.asarray(X2, dtype=float)
        rho = np.hypot(X1, X2)
        phi = np.arctan2(X2, X1) - beta0
        with np.errstate(invalid="ignore"):
            out = np.where(rho > 0.0,
                           rho ** (math.pi / theta)
                           * np.sin(np.clip(phi, 0.0, theta)
                                    * math.pi / theta),
                           0.0)
        return out

    return u


def boundary_data(kind: str, profile: geo.BoundaryProfile) -> Callable:
    """Dirichlet data for the box top and lateral sides.

    "linear" is the profile-independent x2 (the half-space solution, so
    trace deviations from 1 isolate the boundary-geometry effect);
    "sector" is the wedge harmonic, valid for wedge profiles only."""
    if kind == "linear":
        return lambda X1, X2: np.asarray(X2, dtype=float) * np.ones_like(
            np.asarray(X1, dtype=float))
    if kind == "sector":
        preset = getattr(profile, "preset", "") or ""
        name, _, arg = preset.partition(":")
        if name != "wedge":
            raise ValueError("sector data requires a wedge profile")
        theta = float(arg) if arg else 2.0 * math.pi / 3.0
        return sector_harmonic(theta)
    raise ValueError(f"unknown bc kind {kind!r}")


@dataclass(frozen=True)
class DecayReport:
    config: HopfExperiment
    radii: tuple               # r_k, k = 0..K
    osc: tuple                 # oscillation over P_{r_k}
    ratios: tuple              # osc_{k+1}/osc_k (length K)
    deltas: tuple              # delta(r_k/2)
    kappa: float
    products: tuple            # prod_{j<=k} (1 - kappa delta(r_j/2))
    trace: tuple               # u(0, r_k)/r_k
    trace_heights: tuple       # grid-snapped heights
    verdict: HopfVerdict
    dini_verdict: Verdict
    residual: float
    grid_h: float
    unknowns: int

    def usable_pairs(self):
        """(k, k+3) index pairs realizing the factor-8 scale relation."""
        return [(k, k + 3) for k in range(len(self.radii) - 3)
                if self.osc[k] > 1e-14]


def _fit_kappa(osc, deltas) -> float:
    vals = []
    for k in range(len(osc) - 3):
        if osc[k] <= 1e-14 or deltas[k] <= 0.0:
            continue
        vals.append((1.0 - osc[k + 3] / osc[k]) / deltas[k])
    if not vals:
        return 0.0
    return float(min(max(min(vals), 0.0), 1.0 - 1e-9))


def run_experiment(cfg: HopfExperiment) -> DecayReport:
    """Solve once and extract oscillations, trace and verdict.

    Verdict rule: HopfDegenerates when the trace strictly decreases over
    the last four levels and the boundary modulus classifies NonDini;
    HopfHolds when the trace varies by less than 5% relatively over the
    last four levels and the modulus classifies Dini; else Inconclusive.
    """
    cfg.validate()
    profile = geo.preset_profile(cfg.profile, R0=cfg.R0)
    op = preset_operator(cfg.operator)
    bc = boundary_data(cfg.bc, profile)
    dom = fds.DiscreteDomain.build(profile, cfg.h)
    sol = fds.solve(fds.discretize(op, dom, bc))

    radii = [2.0 ** -k * cfg.R0 for k in range(cfg.K + 1)]
    osc = []
    for r in radii:
        try:
            osc.append(fds.oscillation(sol, profile, r))
        except EmptyRegionError:
            break
    if len(osc) < 3:
        raise ScaleStarvedError(
            f"only {len(osc)} usable dyadic levels at h = {cfg.h}")
    radii = radii[:len(osc)]
    ratios = [osc[k + 1] / osc[k] if osc[k] > 1e-300 else 1.0
              for k in range(len(osc) - 1)]
    deltas = [geo.delta(profile, r / 2.0) for r in radii]
    kappa = _fit_kappa(osc, deltas)
    products = []
    p = 1.0
    for d in deltas:
        p *= 1.0 - kappa * d
        products.append(p)

    heights = [round(r / cfg.h) * cfg.h for r in radii]
    trace = fds.hopf_trace(sol, heights)

    sigma, hint = geo.boundary_modulus(profile)
    if hint is not None:
        dini = hint
    elif sigma is not None:
        dini = dini_classify(sigma).verdict
    else:
        dini = Verdict.INCONCLUSIVE

    tail = np.asarray(trace[-4:])
    strictly_down = bool(np.all(np.diff(tail) < 0.0))
    rel_var = float((tail.max() - tail.min()) / max(abs(tail.max()), 1e-300))
    if strictly_down and dini == Verdict.NON_DINI:
        verdict = HopfVerdict.DEGENERATES
    elif rel_var < 0.05 and dini == Verdict.DINI:
        verdict = HopfVerdict.HOLDS
    else:
        verdict = HopfVerdict.INCONCLUSIVE

    return DecayReport(
        config=cfg, radii=tuple(radii), osc=tuple(osc), ratios=tuple(ratios),
        deltas=tuple(deltas), kappa=kappa, products=tuple(products),
        trace=tuple(float(t) for t in trace), trace_heights=tuple(heights),
        verdict=verdict, dini_verdict=dini, residual=sol.residual_norm,
        grid_h=cfg.h, unknowns=dom.n_unknowns)


# ----------------------------------------------------------------------
# damping product along base-8 radii
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ProductReport:
    radii: tuple               # r_j = 8^-j R0
    partials: tuple            # prod_{i<=j} (1 - kappa delta(r_i/2))
    delta_sum: float
    integral: float            # int of delta(r)/r over [r_K/2, r_0/2]
    sum_to_integral: float
    limit_estimate: float      # partial_K damped by the analytic tail bound
    tail_sum_bound: float


def product_bound(delta_fn: Callable[[float], float], kappa: float,
                  R0: float, K: int) -> ProductReport:
    """Partial products prod_{j=0..k} (1 - kappa delta(8^-j R0 / 2)).

    Also reports the dyadic sum of delta values against the integral of
    delta(r)/r over the covered range (they agree within a factor ln 8),
    and a tail-bounded limit estimate using one extra dyadic block."""
    if not 0.0 < kappa < 1.0:
        raise ValueError("kappa must lie in (0, 1)")
    radii = [8.0 ** -j * R0 for j in range(K + 1)]
    deltas = [float(delta_fn(r / 2.0)) for r in radii]
    if deltas[0] * kappa >= 1.0:
        raise geo.DomainError("kappa * delta(r0/2) >= 1: factors not positive")
    partials = []
    p = 1.0
    for d in deltas:
        p *= 1.0 - kappa * d
        partials.append(p)
    delta_sum = float(np.sum(deltas))

    def _delta_arr(t):
        flat = np.atleast_1d(np.asarray(t, dtype=float)).ravel()
        return np.asarray([float(delta_fn(v)) for v in flat]).reshape(
            np.shape(t))

    integral = _panel_integral(Modulus(fn=_delta_arr),
                               radii[-1] / 2.0, radii[0] / 2.0,
                               panels=4 * (K + 1))
    # nonincreasing delta along shrinking radii: one extra dyadic block
    # bounds the tail sum by delta(r_K/2) * (extra levels), and below the
    # last computed level the factors only shrink the limit further by at
    # most kappa * tail of the delta sum; estimate with a geometric-t0
    # continuation of the last increment ratio
    incs = np.asarray(deltas)
    if K >= 2 and incs[-2] > 0.0:
        q = min(incs[-1] / incs[-2], 0.999999)
    else:
        q = 0.0
    tail = incs[-1] * q / (1.0 - q) if q > 0.0 else 0.0
    limit_estimate = partials[-1] * math.exp(-kappa * tail / max(
        1.0 - kappa * incs[-1], 1e-12))
    return ProductReport(
        radii=tuple(radii), partials=tuple(partials), delta_sum=delta_sum,
        integral=float(integral),
        sum_to_integral=float(delta_sum / integral) if integral > 0 else math.inf,
        limit_estimate=float(limit_estimate), tail_sum_bound=float(tail))


# ----------------------------------------------------------------------
# supremum-growth recursion
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RecursionReport:
    gamma: tuple
    pi_partials: tuple
    pi_value: float
    pi_increment_at_horizon: float
    pi_tail_bound: float       # analytic bound on sum of gamma beyond horizon
    m_bound: tuple             # M_k trajectory with the recursion as equality
    c4_estimate: float
    sigma_sum: float           # sum over k >= 1 of sigma(2^-k rho/rho*)
    sigma_integral: float      # J(rho/rho*)
    sum_to_integral: float


def growth_recursion_bound(sigma: Modulus, mathfrak_b: float,
                           mathfrak_f: float, vartheta: float, k0: int,
                           rho_ratio: float = 1.0, horizon: int = 200,
                           m1: float = 1.0, n2: float = 1.0,
                           n3: float = 1.0) -> RecursionReport:
    """Evaluate the supremum-propagation recursion driven by sigma.

    gamma_k = (1-t/2)^-1 (2 zeta_k/zeta_{k+1})
              (exp(-lambda/(2 zeta_k)) + N2 B sigma(2^-k rho/rho*)/(t/2)),
    zeta_k = 1/(k+k0), lambda = -ln(1 - t/2).  Requires gamma_1 <= 1/2;
    otherwise ``AdjustK0Error`` carries the minimal admissible k0 (when
    the sigma term alone blocks the bound, no k0 works and the error says
    to shrink rho_ratio).  The M_k trajectory takes the recursion as
    equality, which dominates the true inequality.
    """
    if not 0.0 < vartheta < 1.0:
        raise ValueError("vartheta must lie in (0, 1)")
    if not 0.0 < rho_ratio <= 1.0:
        raise ValueError("rho_ratio must lie in (0, 1]")
    lam = -math.log(1.0 - vartheta / 2.0)
    pref = 1.0 / (1.0 - vartheta / 2.0)
    half_t = vartheta / 2.0

    def gamma_at(k: int, k0v: int) -> float:
        zr = 2.0 * (k + k0v + 1.0) / (k + k0v)
        sig = float(sigma(min(2.0 ** -k * rho_ratio, 1.0)))
        return pref * zr * (math.exp(-lam * (k + k0v) / 2.0)
                            + n2 * mathfrak_b * sig / half_t)

    if gamma_at(1, k0) > 0.5:
        minimal = None
        for cand in range(k0 + 1, 400):
            if gamma_at(1, cand) <= 0.5:
                minimal = cand
                break
        msg = (f"gamma_1 = {gamma_at(1, k0):.4f} > 1/2 at k0 = {k0}"
               + (f"; minimal admissible k0 = {minimal}" if minimal
                  else "; no k0 suffices, reduce rho_ratio"))
        raise AdjustK0Error(msg, minimal_k0=minimal)

    ks = np.arange(1, horizon + 1)
    gam = np.array([gamma_at(int(k), k0) for k in ks])
    pi_partials = np.cumprod(1.0 + gam)
    pi_value = float(pi_partials[-1])
    increment = float(pi_partials[-1] - pi_partials[-2])

    # tail bound: geometric closure of the exp part plus the dyadic-sum /
    # integral comparison for the sigma part
    exp_tail = (pref * 2.0 * (horizon + k0 + 2.0) / (horizon + k0 + 1.0)
                * math.exp(-lam * (horizon + 1 + k0) / 2.0)
                / (1.0 - math.exp(-lam / 2.0)))
    try:
        j_small = dini_integral(sigma, min(2.0 ** -horizon * rho_ratio, 1.0),
                                rel_tol=1e-6, max_intervals=900)
        sig_tail = (pref * 2.0 * n2 * mathfrak_b / half_t
                    * j_small / math.log(2.0))
    except Exception:
        sig_tail = math.inf
    pi_tail_bound = exp_tail + sig_tail

    sig_terms = np.array([float(sigma(min(2.0 ** -int(k) * rho_ratio, 1.0)))
                          for k in ks])
    zeta_fac = (ks + k0 + 1.0) / (ks + k0)  # zeta_k / zeta_{k+1}
    m_vals = [m1]
    for k in range(horizon):
        src = (n3 * mathfrak_f * sig_terms[k] * 2.0 * zeta_fac[k]
               / ((1.0 - half_t) * half_t))
        m_vals.append(m_vals[-1] * (1.0 + gam[k]) + src)
    m_bound = np.asarray(m_vals)

    sigma_sum = float(sig_terms.sum())
    j_val = dini_integral(sigma, rho_ratio, rel_tol=1e-9, max_intervals=1400) \
        if sigma.closed_form_j is not None else None
    if j_val is None:
        try:
            j_val = dini_integral(sigma, rho_ratio, rel_tol=1e-6,
                                  max_intervals=900)
        except Exception:
            j_val = math.inf
    denom = m1 + mathfrak_f * (j_val if math.isfinite(j_val) else 0.0)
    c4 = float(m_bound.max() / denom) if denom > 0 else math.inf
    return RecursionReport(
        gamma=tuple(float(g) for g in gam),
        pi_partials=tuple(float(p) for p in pi_partials),
        pi_value=pi_value,
        pi_increment_at_horizon=increment,
        pi_tail_bound=float(pi_tail_bound),
        m_bound=tuple(float(m) for m in m_bound),
        c4_estimate=c4,
        sigma_sum=sigma_sum,
        sigma_integral=float(j_val),
        sum_to_integral=float(sigma_sum / j_val) if j_val and
        math.isfinite(j_val) and j_val > 0 else math.inf)


# ----------------------------------------------------------------------
# contrast suite
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ContrastReport:
    rows: tuple                # dicts per profile
    consistency_ok: bool
    common_kappa: float


def contrast_suite(profiles: Sequence[str], operator: str,
                   cfg: HopfExperiment,
                   common_kappa: float = 0.1) -> ContrastReport:
    """Run the experiment per profile and cross-compare damping products.

    Requires at least one Dini and one non-Dini profile.  Consistency
    property: with one common kappa, every non-Dini profile's partial
    product at depth K sits below every Dini profile's."""
    reports = {}
    for p in profiles:
        c = HopfExperiment(profile=p, operator=operator, R0=cfg.R0, K=cfg.K,
                           h=cfg.h, bc=cfg.bc, seed=cfg.seed)
        reports[p] = run_experiment(c)
    verdicts = {p: r.dini_verdict for p, r in reports.items()}
    if not any(v == Verdict.NON_DINI for v in verdicts.values()) or \
            not any(v == Verdict.DINI for v in verdicts.values()):
        raise ValueError("contrast needs at least one Dini and one "
                         "non-Dini profile")
    prods = {}
    for p in profiles:
        prof = geo.preset_profile(p, R0=cfg.R0)
        prods[p] = product_bound(lambda r, prof=prof: geo.delta(prof, r),
                                 common_kappa, cfg.R0, 40).partials[-1]
    dini_products = [prods[p] for p in profiles
                     if verdicts[p] == Verdict.DINI]
    nondini_products = [prods[p] for p in profiles
                        if verdicts[p] == Verdict.NON_DINI]
    ok = max(nondini_products) < min(dini_products)
    rows = tuple(
        {"profile": p,
         "dini": str(verdicts[p]),
         "trace_first": reports[p].trace[0],
         "trace_last": reports[p].trace[-1],
         "kappa": reports[p].kappa,
         "product_K": prods[p],
         "verdict": str(reports[p].verdict)}
        for p in profiles)
    return ContrastReport(rows=rows, consistency_ok=bool(ok),
                          common_kappa=common_kappa)


# ----------------------------------------------------------------------
# report emission
# ----------------------------------------------------------------------

def report_csv(report: DecayReport) -> str:
    """One row per dyadic level: k, r_k, osc_k, ratio_k, delta_k,
    product_k, h_k (trace value at the level's height)."""
    buf = io.StringIO()
    buf.write("k,r_k,osc_k,ratio_k,delta_k,product_k,h_k\n")
    for k, r in enumerate(report.radii):
        ratio = repr(report.ratios[k]) if k < len(report.ratios) else ""
        buf.write(f"{k},{r!r},{report.osc[k]!r},{ratio},"
                  f"{report.deltas[k]!r},{report.products[k]!r},"
                  f"{report.trace[k]!r}\n")
    return buf.getvalue()


def report_summary(report: DecayReport) -> str:
    cfg = report.config
    lines = [
        f"verdict: {report.verdict}",
        f"dini: {report.dini_verdict}",
        f"kappa: {report.kappa!r}",
        f"profile: {cfg.profile}",
        f"operator: {cfg.operator}",
        f"R0: {cfg.R0!r}",
        f"K: {cfg.K}",
        f"grid.h: {cfg.h!r}",
        f"bc.kind: {cfg.bc}",
        f"seed: {cfg.seed}",
        f"residual: {report.residual!r}",
        f"unknowns: {report.unknowns}",
        f"trace_heights: {' '.join(repr(t) for t in report.trace_heights)}",
    ]
    return "\n".join(lines) + "\n"
