import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extborrow.borrow_estimation import (
    BorrowEstimate,
    Method,
    ReferencePrecision,
    SolverConfig,
    Stability,
    d_eff_exact,
    d_eff_generalized,
    derivative_diagnostic,
    ehss_events,
    ehss_patients,
    events_to_patients,
    hybrid_precision_exponential,
    solve_generalized,
    weighted_reference_precision,
)
from extborrow.errors import ConfigError, EvaluationFailed, KappaZero, PrecisionAtOrAbovePole, Separation
from extborrow.survival_models import ModelKind, fit_cox, fit_exponential, fit_model
from extborrow.trial_sim import ScenarioConfig, simulate_dataset

from conftest import SIX_CONTROL, SIX_EXPERIMENTAL, TEN_CONTROL, TEN_EXPERIMENTAL, make_snapshot
from oracles import cox_oracle

# Weighted Cox fixture, d_eff = 3 (control weight 2): frozen from cox_oracle.
TEN_D3_VARIANCE = 0.51355237735


class TestExact:
    def test_no_borrowing(self):
        assert d_eff_exact(10 * 12 / 22, 10, 12) == pytest.approx(0.0, abs=1e-12)

    def test_inverts_forward_formula(self):
        assert d_eff_exact(15 * 12 / 27, 10, 12) == pytest.approx(5.0, rel=1e-12)

    def test_pole(self):
        with pytest.raises(PrecisionAtOrAbovePole):
            d_eff_exact(12.0, 10, 12)
        with pytest.raises(PrecisionAtOrAbovePole):
            d_eff_exact(12.5, 10, 12)


@settings(max_examples=1000, deadline=None)
@given(
    d_c=st.integers(1, 200),
    d_e=st.integers(1, 200),
    frac=st.floats(0.0, 1.0, exclude_min=True),
)
def test_exact_round_trip(d_c, d_e, frac):
    d_eff = -d_c + frac * (100 + d_c)
    tau2 = hybrid_precision_exponential(d_c, d_e, d_eff)
    back = d_eff_exact(tau2, d_c, d_e)
    assert back == pytest.approx(d_eff, rel=1e-9, abs=1e-9 * d_c)


class TestEHSS:
    def test_events(self):
        assert ehss_events(5.0, 5.0, 10, 12) == 0.0
        assert ehss_events(6.0, 5.0, 10, 10) == pytest.approx(4.0)
        assert d_eff_exact(6.0, 10, 10) == pytest.approx(5.0)
        assert ehss_events(15 * 12 / 27, 120 / 22, 10, 12) == pytest.approx(4.8888889, rel=1e-7)

    def test_patients(self):
        assert ehss_patients(3.3, 3.3, 17, 19) == 0.0
        assert ehss_patients(1.2, 1.0, 30, 30) == pytest.approx(12.0)
        assert ehss_patients(1.1, 1.0, 40, 30) == pytest.approx(7.0)

    @settings(max_examples=300, deadline=None)
    @given(d=st.integers(1, 200), r=st.floats(1.001, 1.999))
    def test_exact_exceeds_ehss_balanced(self, d, r):
        # with d_C = d_E = d the exact solution is EHSS_d / (2 - r)
        tau2_ref = d / 2
        tau2_hyb = r * tau2_ref
        e = ehss_events(tau2_hyb, tau2_ref, d, d)
        x = d_eff_exact(tau2_hyb, d, d)
        assert x == pytest.approx(e / (2 - r), rel=1e-9)
        assert x > e


class TestEventsToPatients:
    @pytest.mark.parametrize("d,k,expected", [(5, 0.5, 10), (0, 0.3, 0), (7, 0.35, 20)])
    def test_values(self, d, k, expected):
        assert events_to_patients(d, k) == pytest.approx(expected)

    @pytest.mark.parametrize("k", [0.0, -0.1])
    def test_kappa_zero(self, k):
        with pytest.raises(KappaZero):
            events_to_patients(3.0, k)


class TestDerivativeDiagnostic:
    def test_affine_exact(self):
        assert derivative_diagnostic(lambda d: 2.5 - 0.75 * d, 4.0, 0.5) == -0.75

    def test_quadratic(self):
        assert derivative_diagnostic(lambda d: d * d, 3.0, 1e-4) == pytest.approx(6.0, abs=1e-8)

    @pytest.mark.parametrize("d_c,d_e", [(10, 12), (20, 11), (15, 40)])
    def test_weighted_exponential_slope(self, d_c, d_e):
        analytic = d_e**2 / (d_c + d_e) ** 2
        fd = derivative_diagnostic(lambda d: hybrid_precision_exponential(d_c, d_e, d), 0.0, 1e-4)
        assert fd == pytest.approx(analytic, abs=1e-6)

    def test_fit_failure_becomes_evaluation_failed(self):
        def broken(d):
            raise Separation("boom")

        with pytest.raises(EvaluationFailed):
            derivative_diagnostic(broken, 0.0, 1e-4)


class TestWeightedReferencePrecision:
    @pytest.fixture
    def snap(self):
        return make_snapshot(TEN_CONTROL, TEN_EXPERIMENTAL)

    @pytest.mark.parametrize("kind", list(ModelKind))
    def test_zero_is_unweighted(self, snap, kind):
        assert weighted_reference_precision(snap, 0.0, kind) == fit_model(kind, snap.trial_subjects).precision

    def test_exponential_doubled_controls(self, snap):
        d_c, d_e = snap.d_C, snap.d_E
        got = weighted_reference_precision(snap, d_c, ModelKind.EXPONENTIAL)
        assert got == pytest.approx(2 * d_c * d_e / (2 * d_c + d_e), rel=1e-14)

    def test_cox_fixture(self, snap):
        assert snap.d_C == 3
        got = weighted_reference_precision(snap, 3.0, ModelKind.COX)
        assert got == pytest.approx(1 / TEN_D3_VARIANCE, rel=1e-5)
        rows = [(t, d, 0, 2.0) for t, d in TEN_CONTROL] + [(t, d, 1, 1.0) for t, d in TEN_EXPERIMENTAL]
        assert got == pytest.approx(1 / cox_oracle(rows)[1], rel=1e-5)

    def test_domain(self, snap):
        with pytest.raises(ValueError):
            weighted_reference_precision(snap, -3.0, ModelKind.COX)

    def test_exponential_curve_increasing(self, snap):
        curve = ReferencePrecision(snap.trial_subjects, snap.d_C, ModelKind.EXPONENTIAL)
        grid = np.linspace(-snap.d_C + 0.01, 50, 200)
        assert np.all(np.diff([curve(d) for d in grid]) > 0)

    def test_memoizes(self, snap):
        curve = ReferencePrecision(snap.trial_subjects, snap.d_C, ModelKind.COX)
        curve(1.0)
        curve(1.0)
        assert curve.n_evaluations == 1


class TestSolverConfig:
    def test_defaults(self):
        s = SolverConfig()
        assert (s.search_lower_offset, s.search_upper, s.fd_epsilon) == (0.001, 1000.0, 0.0001)
        assert s.derivative_cutoff == math.exp(-3)
        assert s.interval(10) == (-9.999, 1000.0)

    @pytest.mark.parametrize("kw", [{"fd_epsilon": 0.0}, {"root_tolerance": -1.0}, {"fd_epsilon": 0.01}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            SolverConfig(**kw)

    def test_empty_interval(self):
        with pytest.raises(ConfigError):
            SolverConfig(search_upper=0.0005).interval(0)


@pytest.fixture(scope="module")
def exp_snaps():
    cfg = ScenarioConfig()
    return [simulate_dataset(cfg, h, s)[0] for h in range(4) for s in range(25)]


class TestGeneralized:
    @pytest.mark.parametrize("kind", list(ModelKind))
    def test_reference_precision_gives_zero(self, kind):
        snap = make_snapshot(TEN_CONTROL, TEN_EXPERIMENTAL)
        tau2 = fit_model(kind, snap.trial_subjects).precision
        est = d_eff_generalized(snap, tau2, kind)
        assert est.method is Method.GENERALIZED
        assert est.d_eff_hat == pytest.approx(0.0, abs=1e-8)
        expected = Stability.STABLE if est.derivative_at_solution >= math.exp(-3) else Stability.UNSTABLE_DERIVATIVE
        assert est.stability is expected

    def test_equals_exact_on_exponential_data(self, exp_snaps):
        for snap in exp_snaps:
            hyb = fit_exponential(list(snap.subjects)).precision
            est = d_eff_generalized(snap, hyb, ModelKind.EXPONENTIAL, kappa=snap.kappa)
            exact = d_eff_exact(hyb, snap.d_C, snap.d_E)
            assert est.d_eff_hat == pytest.approx(exact, abs=1e-4)
            assert est.d_eff_hat == pytest.approx(snap.d_ext, abs=1e-4)
            assert est.effective_patients == pytest.approx(est.d_eff_hat / snap.kappa)
            slope = snap.d_E**2 / (snap.d_C + snap.d_E + est.d_eff_hat) ** 2
            assert est.derivative_at_solution == pytest.approx(slope, abs=1e-6)

    def test_solver_contract_cox(self):
        cfg = ScenarioConfig(weibull_shape=1.15)
        seen = set()
        for h in range(4):
            for s in range(15):
                snap = simulate_dataset(cfg, h, s)[0]
                hyb = fit_cox(list(snap.subjects)).precision
                curve = ReferencePrecision(snap.trial_subjects, snap.d_C, ModelKind.COX)
                est = solve_generalized(curve, hyb)
                seen.add(est.stability)
                if est.stability is Stability.UNSTABLE_NO_ROOT:
                    assert est.d_eff_hat is None
                else:
                    assert abs(curve(est.d_eff_hat) - hyb) < 1e-8
                if est.stability is Stability.UNSTABLE_DERIVATIVE:
                    assert est.derivative_at_solution < math.exp(-3)
        assert Stability.STABLE in seen and Stability.UNSTABLE_DERIVATIVE in seen

    def test_no_sign_change_reports_no_root(self):
        snap = make_snapshot(TEN_CONTROL, TEN_EXPERIMENTAL)
        # above the exponential pole d_E: unreachable by any d_eff
        est = d_eff_generalized(snap, snap.d_E + 1.0, ModelKind.EXPONENTIAL)
        assert est == BorrowEstimate(Method.GENERALIZED, None, None, Stability.UNSTABLE_NO_ROOT)

    def test_cutoff_is_configurable(self):
        snap = make_snapshot(SIX_CONTROL, SIX_EXPERIMENTAL)
        tau2 = fit_exponential(snap.trial_subjects).precision * 1.05
        strict = d_eff_generalized(snap, tau2, ModelKind.EXPONENTIAL, SolverConfig(derivative_cutoff=10.0))
        lax = d_eff_generalized(snap, tau2, ModelKind.EXPONENTIAL, SolverConfig(derivative_cutoff=1e-9))
        assert strict.stability is Stability.UNSTABLE_DERIVATIVE
        assert lax.stability is Stability.STABLE
        assert strict.d_eff_hat == lax.d_eff_hat
