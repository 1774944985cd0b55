import math

import numpy as np
import pytest

from hopflab import modulus as M


# ---------------------------------------------------------------- oracles

def suffix_max_regularized(sigma, grid):
    """Dense suffix-maximum oracle for t * sup_{tau in [t,1]} sigma(tau)/tau."""
    dense = np.geomspace(grid.min(), 1.0, 20000)
    ratio = sigma(dense) / dense
    suffix = np.maximum.accumulate(ratio[::-1])[::-1]
    out = []
    for t in grid:
        k = np.searchsorted(dense, t, side="left")
        out.append(t * suffix[min(k, dense.size - 1)])
    return np.asarray(out)


GOOD_PRESETS = ["linear", "power:0.5", "power:0.25", "log1"]  # ratio-monotone
ALL_PRESETS = GOOD_PRESETS + ["log2"]


# ---------------------------------------------------------------- invariants

@pytest.mark.parametrize("pid", ALL_PRESETS)
def test_preset_endpoints_and_monotonicity(pid):
    sigma = M.preset_modulus(pid)
    assert abs(sigma(0.0)) <= 1e-12
    assert abs(sigma(1.0) - 1.0) <= 1e-12
    rep = M.check_invariants(sigma)
    assert rep.endpoints_ok
    assert rep.monotone_ok


@pytest.mark.parametrize("pid", GOOD_PRESETS)
def test_ratio_monotone_presets(pid):
    assert M.check_invariants(M.preset_modulus(pid)).ratio_monotone_ok


def test_log2_ratio_rises_near_one():
    # 1/ln(e/t)^2 has sigma(t)/t increasing again on [1/e, 1]; the
    # regularized majorant restores the ratio monotonicity
    sigma = M.preset_modulus("log2")
    assert not M.check_invariants(sigma).ratio_monotone_ok
    assert sigma.ratio(0.5) < sigma.ratio(1.0)
    reg = M.regularize(sigma)
    assert M.check_invariants(reg).ratio_monotone_ok


# ---------------------------------------------------------------- regularize

def test_regularize_linear_fixed_point():
    reg = M.regularize(lambda t: np.asarray(t, dtype=float))
    grid = np.geomspace(1e-10, 1.0, 64)
    np.testing.assert_allclose(reg(grid), grid, rtol=0, atol=1e-14)


def test_regularize_square_becomes_linear():
    raw = lambda t: np.asarray(t, dtype=float) ** 2
    reg = M.regularize(raw)
    grid = np.geomspace(1e-10, 1.0, 64)
    oracle = suffix_max_regularized(lambda t: np.asarray(t) ** 2.0, grid)
    np.testing.assert_allclose(reg(grid), grid, atol=1e-12)
    np.testing.assert_allclose(reg(grid), oracle, rtol=1e-6)


def test_regularize_sqrt_fixed_point():
    raw = lambda t: np.sqrt(np.asarray(t, dtype=float))
    reg = M.regularize(raw)
    grid = np.geomspace(1e-10, 1.0, 64)
    np.testing.assert_allclose(reg(grid), np.sqrt(grid), rtol=1e-12)


def test_regularize_majorizes_and_idempotent():
    raw = lambda t: np.asarray(t, dtype=float) ** 2
    reg = M.regularize(raw, grid_size=300)
    grid = np.geomspace(1e-12, 1.0, 300)
    assert np.all(reg(grid) >= raw(grid) - 1e-14)
    reg2 = M.regularize(reg, grid_size=300)
    np.testing.assert_allclose(reg2(grid), reg(grid), rtol=1e-10)


def test_regularize_rejects_bad_input():
    with pytest.raises(M.NotNormalizedError):
        M.regularize(lambda t: 2.0 * np.asarray(t, dtype=float))
    with pytest.raises(M.NotMonotoneError):
        M.regularize(lambda t: np.where(np.asarray(t) < 0.5,
                                        np.asarray(t, dtype=float),
                                        np.asarray(t, dtype=float) ** 4))


# ---------------------------------------------------------------- integral

def test_dini_integral_linear():
    assert M.dini_integral(M.preset_modulus("linear"), 0.5) == 0.5


def test_dini_integral_power_closed_form():
    # antiderivative s^alpha/alpha
    assert M.dini_integral(M.preset_modulus("power:0.5"), 1.0) == 2.0
    q = M.dini_integral(M.preset_modulus("power:0.5"), 1.0,
                        force_quadrature=True, rel_tol=1e-9)
    assert abs(q - 2.0) <= 1e-8


def test_dini_integral_log2_closed_form():
    # antiderivative 1/ln(e/tau): J(1) = 1
    assert M.dini_integral(M.preset_modulus("log2"), 1.0) == 1.0
    rep = M.dini_integral_report(M.preset_modulus("log2"), 1.0)
    assert rep.method == "closed-form"
    # cross-check quadrature stops at the precision floor but agrees to
    # its own partial accuracy
    assert rep.quadrature_value == pytest.approx(1.0, abs=2e-3)


def test_dini_integral_quadrature_matches_antiderivative():
    for pid, j in [("linear", lambda s: s),
                   ("power:0.5", lambda s: 2.0 * math.sqrt(s)),
                   ("power:0.25", lambda s: 4.0 * s**0.25)]:
        sigma = M.preset_modulus(pid)
        for s in (0.07, 0.3, 1.0):
            q = M.dini_integral(sigma, s, rel_tol=1e-7,
                                force_quadrature=True)
            assert q == pytest.approx(j(s), rel=1e-6)


def test_dini_integral_monotone_in_s():
    sigma = M.preset_modulus("power:0.5")
    vals = [M.dini_integral(sigma, s) for s in (0.1, 0.3, 0.6, 1.0)]
    assert np.all(np.diff(vals) >= 0.0)


def test_dini_integral_divergent_log1():
    with pytest.raises(M.DiniDivergenceError):
        M.dini_integral(M.preset_modulus("log1"), 1.0)


def test_dini_integral_budget_error():
    with pytest.raises(M.QuadratureToleranceError):
        M.dini_integral(M.preset_modulus("log2"), 1.0, rel_tol=1e-6,
                        force_quadrature=True, max_intervals=200)


def test_dini_integral_domain():
    with pytest.raises(ValueError):
        M.dini_integral(M.preset_modulus("linear"), 1.5)


# ---------------------------------------------------------------- classify

def test_classify_preset_verdicts():
    assert M.dini_classify(M.preset_modulus("linear")).verdict == M.Verdict.DINI
    assert M.dini_classify(M.preset_modulus("power:0.5")).verdict == M.Verdict.DINI
    assert M.dini_classify(M.preset_modulus("log2")).verdict == M.Verdict.DINI
    assert M.dini_classify(M.preset_modulus("log1")).verdict == M.Verdict.NON_DINI


def test_classify_numeric_behavior():
    # geometric increments classify numerically; the log pair lands in the
    # Inconclusive band of the ratio test and is separated by the fitted
    # decay exponent (~1 divergent vs ~2 convergent)
    assert M.dini_classify(M.preset_modulus("linear")).numeric_verdict \
        == M.Verdict.DINI
    assert M.dini_classify(M.preset_modulus("power:0.5")).numeric_verdict \
        == M.Verdict.DINI
    v1 = M.dini_classify(M.preset_modulus("log1"))
    v2 = M.dini_classify(M.preset_modulus("log2"))
    assert v1.growth_exponent_estimate == pytest.approx(1.0, abs=0.15)
    assert v2.growth_exponent_estimate == pytest.approx(2.0, abs=0.25)


def test_classify_partial_integrals_nondecreasing():
    for pid in ALL_PRESETS:
        v = M.dini_classify(M.preset_modulus(pid))
        partials = [p for _, p in v.partial_integrals]
        lows = [a for a, _ in v.partial_integrals]
        assert np.all(np.diff(partials) >= -1e-15)
        assert np.all(np.diff(lows) < 0.0)


def test_classify_tabulated_without_flag():
    table = M.from_table([0.0, 0.25, 0.5, 1.0], [0.0, 0.25, 0.5, 1.0])
    v = M.dini_classify(table)
    assert v.verdict == M.Verdict.DINI  # no flag: numeric verdict rules
    assert v.numeric_verdict == M.Verdict.DINI


# ---------------------------------------------------------------- relations

def test_relations_linear_equality_case():
    rep = M.verify_relations(M.preset_modulus("linear"), 0.3, 0.6)
    assert rep.all_hold
    # sigma(t/t0) = 0.5 equals sigma(t)/t0 = 0.3/0.6 exactly
    assert rep.slack_scaling_sigma == pytest.approx(0.0, abs=1e-12)


def test_relations_sqrt_example():
    rep = M.verify_relations(M.preset_modulus("power:0.5"), 0.25, 0.5)
    assert rep.all_hold
    # sigma(0.5) ~ 0.7071 <= sigma(0.25)/0.5 = 1.0
    assert rep.slack_scaling_sigma == pytest.approx(1.0 - math.sqrt(0.5),
                                                    rel=1e-9)


def test_relations_endpoint_case():
    sigma = M.preset_modulus("power:0.5")
    rep = M.verify_relations(sigma, 0.6, 0.6)
    assert rep.scaling_sigma  # sigma(1) = 1 <= sigma(t0)/t0


def test_relations_domain_error():
    with pytest.raises(M.DomainError):
        M.verify_relations(M.preset_modulus("linear"), 0.7, 0.6)


def test_relations_hold_for_invariant_passing_presets():
    rng = np.random.default_rng(7)
    for pid in GOOD_PRESETS:
        sigma = M.preset_modulus(pid)
        for _ in range(20):
            t0 = float(rng.uniform(0.05, 1.0))
            t = float(rng.uniform(1e-4, t0))
            assert M.verify_relations(sigma, t, t0).all_hold, (pid, t, t0)


def test_sigma_below_dini_integral_on_grid():
    grid = np.geomspace(1e-4, 1.0, 40)
    for pid in ["linear", "power:0.5", "power:0.25"]:
        sigma = M.preset_modulus(pid)
        for t in grid:
            assert sigma(float(t)) <= M.dini_integral(sigma, float(t)) + 1e-8


# ---------------------------------------------------------------- tables

def test_table_roundtrip_and_interpolation():
    t = np.array([0.0, 0.01, 0.1, 0.5, 1.0])
    s = np.sqrt(t)
    table = M.from_table(t, s)
    grid = np.geomspace(0.01, 1.0, 50)
    np.testing.assert_allclose(table(grid), np.sqrt(grid), rtol=1e-12)
    assert M.check_invariants(table).ratio_monotone_ok


def test_csv_loading(tmp_path):
    path = tmp_path / "mod.csv"
    path.write_text("t,sigma\n0.0,0.0\n0.5,0.25\n1.0,1.0\n", encoding="utf-8")
    sigma = M.load_csv(path)
    assert sigma(0.5) == pytest.approx(0.25)
    assert sigma(1.0) == pytest.approx(1.0)


def test_csv_rejects_nonmonotone(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0.0,0.0\n0.5,0.7\n1.0,0.5\n", encoding="utf-8")
    with pytest.raises(M.NotMonotoneError):
        M.load_csv(path)


def test_table_normalization():
    table = M.from_table([0.0, 1.0], [0.0, 4.0])  # rescaled so sigma(1) = 1
    assert table(1.0) == pytest.approx(1.0)
