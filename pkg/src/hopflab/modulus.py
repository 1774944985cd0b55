"""Moduli of continuity at zero and the Dini condition.

A modulus here is a nondecreasing function ``sigma`` on [0, 1] with
``sigma(0) = 0`` and ``sigma(1) = 1``.  The quantity that drives everything
downstream is the Dini integral

    J(s) = int_0^s sigma(tau)/tau dtau,

finite iff sigma satisfies the Dini condition at zero.  The well-behaved
class has ``sigma(t)/t`` nonincreasing, which yields ``sigma(t) <= J(t)``
and the scaling relations ``sigma(t/t0) <= sigma(t)/t0`` and
``J(t/t0) <= J(t)/t0``.

Built-in presets (addressable by string id):

``linear``          sigma(t) = t                (Dini, J(s) = s)
``power:<alpha>``   sigma(t) = t**alpha, 0<a<=1 (Dini, J(s) = s**a/a)
``log1``            sigma(t) = 1/ln(e/t)        (not Dini: J diverges)
``log2``            sigma(t) = 1/ln(e/t)**2     (Dini, J(s) = 1/ln(e/s))

Note: ``log2`` is kept in its raw closed form so its Dini integral stays
exactly 1/ln(e/s).  Its ratio sigma(t)/t rises again on [1/e, 1], so it is
*not* ratio-monotone there; ``regularize`` produces the ratio-monotone
majorant when that property is required.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "DiniVerdict",
    "DiniIntegralResult",
    "InvariantReport",
    "Modulus",
    "NotMonotoneError",
    "NotNormalizedError",
    "DiniDivergenceError",
    "QuadratureToleranceError",
    "RelationReport",
    "Verdict",
    "dini_classify",
    "dini_integral",
    "dini_integral_report",
    "check_invariants",
    "load_csv",
    "from_table",
    "preset_modulus",
    "regularize",
    "verify_relations",
]


class NotNormalizedError(ValueError):
    """Endpoint conditions sigma(0) = 0 or sigma(1) = 1 fail."""


class NotMonotoneError(ValueError):
    """sigma decreases somewhere on the evaluation grid."""


class DiniDivergenceError(ArithmeticError):
    """Geometric-interval contributions of the Dini integral fail to decay.

    ``partial`` holds the sum accumulated before detection."""

    def __init__(self, message: str, partial: float = math.nan):
        super().__init__(message)
        self.partial = partial


class QuadratureToleranceError(ArithmeticError):
    """Requested tolerance cannot be met within the interval budget (or
    within double-precision range).  ``partial`` holds the accumulated sum."""

    def __init__(self, message: str, partial: float = math.nan):
        super().__init__(message)
        self.partial = partial


class Verdict(str, enum.Enum):
    DINI = "Dini"
    NON_DINI = "NonDini"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


# 16-point Gauss-Legendre rule, used panel-wise on dyadic subintervals.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class Modulus:
    """A modulus of continuity on [0, 1].

    Parameters
    ----------
    fn : callable
        Vectorized evaluation, mapping t in [0, 1] to sigma(t).
    kind : str
        "closed-form" or "tabulated".
    preset : str or None
        Preset id when constructed from one.
    closed_form_j : callable or None
        Closed form of the Dini integral J(s), when known.
    dini_flag : Verdict or None
        Analytic Dini verdict for presets; overrides the numeric
        classification in `dini_classify`.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    kind: str = "closed-form"
    preset: Optional[str] = None
    closed_form_j: Optional[Callable[[float], float]] = None
    dini_flag: Optional[Verdict] = None
    label: str = "custom"

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.asarray(self.fn(t_arr), dtype=float)
        if t_arr.ndim == 0:
            return float(out.reshape(-1)[0])
        return out.reshape(t_arr.shape)

    def ratio(self, t):
        """sigma(t)/t, defined on (0, 1]."""
        t_arr = np.asarray(t, dtype=float)
        return self(t_arr) / t_arr


@dataclass(frozen=True)
class InvariantReport:
    endpoints_ok: bool
    monotone_ok: bool
    ratio_monotone_ok: bool
    worst_monotone_violation: float
    worst_ratio_violation: float

    @property
    def all_ok(self) -> bool:
        return self.endpoints_ok and self.monotone_ok and self.ratio_monotone_ok


@dataclass(frozen=True)
class DiniIntegralResult:
    value: float
    method: str  # "closed-form" or "quadrature"
    quadrature_value: Optional[float]
    quadrature_intervals: int
    quadrature_note: str = ""


@dataclass(frozen=True)
class DiniVerdict:
    verdict: Verdict
    numeric_verdict: Verdict
    partial_integrals: tuple  # ((a_m, J over [a_m, 1]), ...)
    growth_exponent_estimate: float
    increment_ratios: tuple = ()


@dataclass(frozen=True)
class RelationReport:
    sigma_le_j: bool
    scaling_sigma: bool
    scaling_j: bool
    slack_sigma_le_j: float
    slack_scaling_sigma: float
    slack_scaling_j: float

    @property
    def all_hold(self) -> bool:
        return self.sigma_le_j and self.scaling_sigma and self.scaling_j


# ----------------------------------------------------------------------
# presets
# ----------------------------------------------------------------------

def _log_e_over(t: np.ndarray) -> np.ndarray:
    # ln(e/t) = 1 - ln t, safe at t = 0 (-> +inf)
    with np.errstate(divide="ignore"):
        return 1.0 - np.log(t)


def preset_modulus(spec: str) -> Modulus:
    """Build a preset modulus from its string id.

    Ids: "linear", "power:<alpha>" with alpha in (0, 1], "log1", "log2".
    """
    name, _, arg = spec.partition(":")
    if name == "linear":
        return Modulus(
            fn=lambda t: np.asarray(t, dtype=float),
            preset=spec,
            closed_form_j=lambda s: s,
            dini_flag=Verdict.DINI,
            label="sigma(t) = t",
        )
    if name == "power":
        alpha = float(arg)
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"power modulus needs alpha in (0, 1], got {alpha}")
        return Modulus(
            fn=lambda t, a=alpha: np.power(np.asarray(t, dtype=float), a),
            preset=spec,
            closed_form_j=lambda s, a=alpha: s**a / a,
            dini_flag=Verdict.DINI,
            label=f"sigma(t) = t^{alpha}",
        )
    if name == "log1":
        def _log1(t):
            t = np.asarray(t, dtype=float)
            return np.where(t > 0.0, 1.0 / _log_e_over(np.maximum(t, 1e-300)), 0.0)

        return Modulus(
            fn=_log1,
            preset=spec,
            closed_form_j=None,  # J diverges at zero
            dini_flag=Verdict.NON_DINI,
            label="sigma(t) = 1/ln(e/t)",
        )
    if name == "log2":
        def _log2(t):
            t = np.asarray(t, dtype=float)
            return np.where(t > 0.0, _log_e_over(np.maximum(t, 1e-300)) ** -2.0, 0.0)

        return Modulus(
            fn=_log2,
            preset=spec,
            closed_form_j=lambda s: 1.0 / (1.0 - math.log(s)),
            dini_flag=Verdict.DINI,
            label="sigma(t) = 1/ln(e/t)^2",
        )
    raise ValueError(f"unknown modulus preset {spec!r}")


# ----------------------------------------------------------------------
# tabulated moduli
# ----------------------------------------------------------------------

def from_table(t: Sequence[float], s: Sequence[float]) -> Modulus:
    """Tabulated modulus, interpolated as a piecewise power law.

    Between positive samples the interpolant is linear in (ln t, ln sigma);
    this preserves monotonicity of both sigma and sigma(t)/t whenever the
    samples satisfy them.  Below the first positive sample the extension is
    linear through the origin (constant ratio).

    The table is normalized so that sigma(1) = 1; t must be strictly
    increasing inside [0, 1] with final abscissa 1.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if t.ndim != 1 or t.shape != s.shape or t.size < 2:
        raise ValueError("need two equal-length 1-D columns with >= 2 rows")
    if np.any(np.diff(t) <= 0.0):
        raise NotMonotoneError("abscissae t must be strictly increasing")
    if t[0] < 0.0 or abs(t[-1] - 1.0) > 1e-12:
        raise NotNormalizedError("t must lie in [0, 1] with last entry 1")
    if np.any(np.diff(s) < 0.0):
        raise NotMonotoneError("sigma values decrease along the table")
    if s[-1] <= 0.0:
        raise NotNormalizedError("sigma(1) must be positive")
    s = s / s[-1]
    if t[0] > 0.0:
        t = np.concatenate(([0.0], t))
        s = np.concatenate(([0.0], s))
    if abs(s[0]) > 1e-12:
        raise NotNormalizedError("sigma(0) must be 0")
    s[0] = 0.0

    tt = t.copy()
    ss = s.copy()

    def _eval(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        idx = np.clip(np.searchsorted(tt, x, side="right") - 1, 0, tt.size - 2)
        lo_t, hi_t = tt[idx], tt[idx + 1]
        lo_s, hi_s = ss[idx], ss[idx + 1]
        linear = (lo_t <= 0.0) | (lo_s <= 0.0)
        out[linear] = np.where(
            hi_t[linear] > 0.0, hi_s[linear] * x[linear] / hi_t[linear], 0.0
        )
        p = ~linear
        if np.any(p):
            beta = np.log(hi_s[p] / lo_s[p]) / np.log(hi_t[p] / lo_t[p])
            out[p] = lo_s[p] * np.exp(beta * np.log(x[p] / lo_t[p]))
        out[x <= 0.0] = 0.0
        out[x >= 1.0] = ss[-1]
        return out

    return Modulus(fn=_eval, kind="tabulated", label="tabulated")


def load_csv(path) -> Modulus:
    """Load a tabulated modulus from a two-column CSV (t, sigma).

    Header row optional; abscissae must be strictly increasing.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except (ValueError, IndexError):
                if not rows:  # tolerate a single header line
                    continue
                raise ValueError(f"malformed CSV row: {line!r}")
    if len(rows) < 2:
        raise ValueError("modulus CSV needs at least two data rows")
    t, s = zip(*rows)
    return from_table(t, s)


# ----------------------------------------------------------------------
# regularization: sigma~(t) = t * sup_{tau in [t,1]} sigma(tau)/tau
# ----------------------------------------------------------------------

def regularize(sigma_raw: Callable[[float], float], grid_size: int = 400) -> Modulus:
    """Ratio-monotone majorant of a raw nondecreasing modulus.

    Evaluates ``t * sup over tau in [t, 1] of sigma(tau)/tau`` on a
    geometric grid (suffix maximum of the sampled ratio) and returns the
    tabulated result.  A modulus whose ratio is already nonincreasing is a
    fixed point at the grid nodes.
    """
    if grid_size < 8:
        raise ValueError("grid_size must be at least 8")
    grid = np.geomspace(1e-12, 1.0, grid_size)
    raw0 = float(sigma_raw(0.0))
    raw1 = float(sigma_raw(1.0))
    if abs(raw0) > 1e-12 or abs(raw1 - 1.0) > 1e-12:
        raise NotNormalizedError(
            f"need sigma(0) = 0 and sigma(1) = 1, got {raw0!r} and {raw1!r}"
        )
    vals = np.asarray([float(sigma_raw(t)) for t in grid])
    if np.any(np.diff(vals) < -1e-12):
        raise NotMonotoneError("sigma decreases on the evaluation grid")
    ratio = vals / grid
    suffix = np.maximum.accumulate(ratio[::-1])[::-1]
    reg = grid * suffix
    # suffix max can only raise values, and the result ends at sigma(1) = 1
    table_t = np.concatenate(([0.0], grid))
    table_s = np.concatenate(([0.0], reg))
    m = from_table(table_t, table_s)
    return Modulus(
        fn=m.fn, kind="tabulated", preset=None, closed_form_j=None,
        dini_flag=None, label="regularized",
    )


# ----------------------------------------------------------------------
# quadrature
# ----------------------------------------------------------------------

def _panel_integral(sigma: Modulus, a: float, b: float, panels: int = 4) -> float:
    """Integral of sigma(tau)/tau over [a, b] by panelled Gauss-Legendre."""
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = sigma(nodes) / nodes
    return float(np.sum(vals * _GL_WEIGHTS[None, :] * half[:, None]))


def _improper_quadrature(sigma: Modulus, s: float, rel_tol: float,
                         max_intervals: int):
    """Sum of dyadic-interval contributions of J(s), with divergence and
    budget guards.  Returns (partial_sum, intervals_used).

    Divergence fires when consecutive contributions keep a ratio of at
    least 1 - 1e-3 for 20 intervals.  When the abscissae exhaust double
    precision first (contributions of log-type moduli approach that ratio
    only around interval 1000, past the 1e-280 floor), the decay exponent
    fitted on the last intervals decides: contributions shrinking no
    faster than 1/m integrate to a divergent tail."""
    total = 0.0
    prev = None
    stall = 0
    hi = s
    history: list = []
    for m in range(max_intervals):
        lo = hi / 2.0
        if lo < 1e-280:
            p = _decay_exponent(history)
            if p <= 1.01:
                raise DiniDivergenceError(
                    f"contributions decay like m^-{p:.3f} (tail diverges); "
                    f"detected at the double-precision floor, interval {m}",
                    partial=total)
            raise QuadratureToleranceError(
                f"rel_tol {rel_tol:g} not reached before exhausting "
                f"double-precision range at interval {m}", partial=total)
        c = _panel_integral(sigma, lo, hi)
        total += c
        history.append(c)
        if c == 0.0:
            return total, m + 1
        if prev is not None and prev > 0.0:
            r = c / prev
            if r >= 1.0 - 1e-3:
                stall += 1
                if stall >= 20:
                    raise DiniDivergenceError(
                        f"contributions fail to decay near zero (ratio "
                        f"{r:.6f} for {stall} consecutive dyadic intervals)",
                        partial=total)
            else:
                stall = 0
            r_cl = min(r, 0.9999)
            tail_estimate = 2.0 * c * r_cl / (1.0 - r_cl)
            if tail_estimate <= rel_tol * max(total, 1e-300):
                return total, m + 1
        prev = c
        hi = lo
    p = _decay_exponent(history)
    if p <= 1.01:
        raise DiniDivergenceError(
            f"contributions decay like m^-{p:.3f} (tail diverges); "
            f"budget of {max_intervals} intervals exhausted", partial=total)
    raise QuadratureToleranceError(
        f"rel_tol {rel_tol:g} not reached within {max_intervals} dyadic "
        f"intervals", partial=total)


def _decay_exponent(history, window: int = 40) -> float:
    """Fitted p in c_m ~ m^-p over the trailing window of contributions."""
    tail = np.asarray(history[-window:], dtype=float)
    pos = tail > 0.0
    if np.count_nonzero(pos) < 4:
        return math.inf
    idx = np.arange(len(history) - len(tail) + 1, len(history) + 1,
                    dtype=float)
    slope = np.polyfit(np.log(idx[pos]), np.log(tail[pos]), 1)[0]
    return float(-slope)


def dini_integral_report(sigma: Modulus, s: float, rel_tol: float = 1e-9,
                         max_intervals: int = 1500,
                         force_quadrature: bool = False) -> DiniIntegralResult:
    """J(s) = int_0^s sigma(tau)/tau dtau with full bookkeeping.

    When the modulus carries a closed form, it is returned and a
    (budget-limited) quadrature value is recorded for cross-checking;
    quadrature failures then only annotate the result.  Otherwise the
    dyadic quadrature value is returned, raising ``DiniDivergenceError``
    when contributions fail to decay and ``QuadratureToleranceError`` when
    the budget is exhausted.
    """
    if not 0.0 < s <= 1.0:
        raise ValueError(f"s must lie in (0, 1], got {s}")
    if sigma.closed_form_j is not None and not force_quadrature:
        value = float(sigma.closed_form_j(s))
        try:
            q, used = _improper_quadrature(sigma, s, rel_tol, max_intervals)
            note = ""
        except (DiniDivergenceError, QuadratureToleranceError) as exc:
            q, used, note = exc.partial, max_intervals, \
                f"cross-check stopped: {exc}"
        return DiniIntegralResult(value, "closed-form", q, used, note)
    q, used = _improper_quadrature(sigma, s, rel_tol, max_intervals)
    return DiniIntegralResult(q, "quadrature", q, used)


def dini_integral(sigma: Modulus, s: float, rel_tol: float = 1e-9,
                  max_intervals: int = 1500,
                  force_quadrature: bool = False) -> float:
    """J(s); see `dini_integral_report` for the algorithm and errors."""
    return dini_integral_report(sigma, s, rel_tol, max_intervals,
                                force_quadrature).value


# ----------------------------------------------------------------------
# classification
# ----------------------------------------------------------------------

def dini_classify(sigma: Modulus, depth: int = 40) -> DiniVerdict:
    """Numeric Dini classification from partial integrals over [2^-m, 1].

    Increments I_m = J over [2^-m, 2^-(m-1)] are inspected over the last 10
    levels: all successive ratios below 0.9 reads as geometric decay (Dini),
    all above 0.99 as non-decaying increments (NonDini), anything between is
    Inconclusive.  A preset's stored analytic flag overrides the verdict;
    the numeric verdict is always reported alongside.  The growth exponent
    estimate is the fitted p in I_m ~ m^-p over the deeper half of the
    levels (large for geometric decay, ~1 for log-type divergence, ~2 for
    log^2-type convergence).
    """
    if depth < 12:
        raise ValueError("depth must be at least 12")
    increments = []
    partials = []
    total = 0.0
    hi = 1.0
    for m in range(1, depth + 1):
        lo = 2.0 ** -m
        c = _panel_integral(sigma, lo, hi)
        total += c
        increments.append(c)
        partials.append((lo, total))
        hi = lo
    inc = np.asarray(increments)

    window = inc[-11:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = window[1:] / window[:-1]
    ratios = np.nan_to_num(ratios, nan=0.0, posinf=np.inf)
    if np.all(window[1:] == 0.0):
        numeric = Verdict.DINI
    elif np.all(ratios < 0.9):
        numeric = Verdict.DINI
    elif np.all(ratios > 0.99):
        numeric = Verdict.NON_DINI
    else:
        numeric = Verdict.INCONCLUSIVE

    half = inc[depth // 2:]
    ms = np.arange(depth // 2 + 1, depth + 1, dtype=float)
    pos = half > 0.0
    if np.count_nonzero(pos) >= 3:
        slope = np.polyfit(np.log(ms[pos]), np.log(half[pos]), 1)[0]
        exponent = -slope
    else:
        exponent = math.inf

    verdict = sigma.dini_flag if sigma.dini_flag is not None else numeric
    return DiniVerdict(
        verdict=verdict,
        numeric_verdict=numeric,
        partial_integrals=tuple(partials),
        growth_exponent_estimate=float(exponent),
        increment_ratios=tuple(float(r) for r in ratios),
    )


# ----------------------------------------------------------------------
# relations and invariants
# ----------------------------------------------------------------------

def verify_relations(sigma: Modulus, t: float, t0: float,
                     rel_tol: float = 1e-9) -> RelationReport:
    """Check sigma(t) <= J(t), sigma(t/t0) <= sigma(t)/t0 and
    J(t/t0) <= J(t)/t0, reporting the slack of each."""
    if not (0.0 < t <= t0 <= 1.0):
        raise DomainError(f"need 0 < t <= t0 <= 1, got t={t}, t0={t0}")
    try:
        j_t = dini_integral(sigma, t, rel_tol)
        j_scaled = dini_integral(sigma, t / t0, rel_tol)
    except DiniDivergenceError:
        j_t = math.inf
        j_scaled = math.inf
    s_t = sigma(t)
    s_scaled = sigma(t / t0)
    tol = 1e-8
    slack1 = j_t - s_t
    slack2 = s_t / t0 - s_scaled
    slack3 = (math.inf if math.isinf(j_t) else j_t / t0 - j_scaled)
    return RelationReport(
        sigma_le_j=bool(slack1 >= -tol * max(1.0, abs(j_t) if not math.isinf(j_t) else 1.0)),
        scaling_sigma=bool(slack2 >= -tol),
        scaling_j=bool(math.isinf(j_t) or slack3 >= -tol * max(1.0, j_t)),
        slack_sigma_le_j=slack1,
        slack_scaling_sigma=slack2,
        slack_scaling_j=slack3,
    )


class DomainError(ValueError):
    """Arguments outside the operation's stated domain."""


def check_invariants(sigma: Modulus, grid_size: int = 400) -> InvariantReport:
    """Sampled endpoint, monotonicity and ratio-monotonicity checks."""
    grid = np.geomspace(1e-10, 1.0, grid_size)
    v0 = sigma(0.0)
    v1 = sigma(1.0)
    endpoints = abs(v0) <= 1e-12 and abs(v1 - 1.0) <= 1e-12
    vals = sigma(grid)
    dmon = np.diff(vals)
    ratio = vals / grid
    drat = np.diff(ratio)
    worst_mon = float(-dmon.min()) if dmon.size else 0.0
    worst_rat = float(drat.max()) if drat.size else 0.0
    return InvariantReport(
        endpoints_ok=bool(endpoints),
        monotone_ok=bool(worst_mon <= 1e-12),
        ratio_monotone_ok=bool(worst_rat <= 1e-12),
        worst_monotone_violation=worst_mon,
        worst_ratio_violation=worst_rat,
    )
