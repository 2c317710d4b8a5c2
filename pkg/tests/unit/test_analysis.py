"""
Unit Tests für analysis.py - Zweistufige Ratio-Analyse

Test Coverage:
- detect_peak() - Parabel-Scheitel, Randmaximum, Fehlerfälle
- fit_gamma() - Handrechnung, R≡1, Generator-Rückgewinnung, 100 Zufallsinstanzen, Fenster, Intercept
- gamma_uncertainty_band() - T*±2dt
- fit_alpha() - exakte Modelle, Einzelpaar, NonPowerLaw
- epsilon_2k() / scale_comparison() - Formelwerte, Schranke bis k=10⁶, Dominanzschwelle, L <= 0
- analysis_pipeline() - synthetische Daten Ende-zu-Ende
"""

import math

import numpy as np
import pytest

from src.analysis import (
    AnalysisError,
    FitWindowError,
    NonPowerLawError,
    PeakDetectionError,
    RatioSeries,
    analysis_pipeline,
    detect_peak,
    epsilon_2k,
    fit_alpha,
    fit_gamma,
    gamma_uncertainty_band,
    scale_comparison,
)
from src.models import DiagnosticsRecord

A_TRUE = 0.89
K_DEFAULT = [5 * j for j in range(1, 21)]


# ============================================================================
# Helpers
# ============================================================================

def power_law_series(k_list, t_star=1.0, betas=None, a=A_TRUE):
    """ln R^k = k^-a ln β on the given β samples (β recomputed from t)."""
    if betas is None:
        betas = np.logspace(-3, 0, 1000)
    t = np.sort(t_star - np.asarray(betas, dtype=float))
    beta = t_star - t
    return RatioSeries(t=t, log_ratios={k: k ** (-a) * np.log(beta) for k in k_list})


def synthetic_records(k_list, t_star=9.0, dt=0.01, t_end=12.0, a=A_TRUE):
    """Records with a parabolic enstrophy peak at t_star and power-law ratios before it."""
    records = []
    for i in range(int(round(t_end / dt)) + 1):
        t = i * dt
        beta = t_star - t
        log_beta = math.log(beta) if beta > 0 else 0.0
        records.append(
            DiagnosticsRecord(
                t=t,
                energy=0.125,
                enstrophy=100.0 - (t - t_star) ** 2,
                log_norms={n: 1.0 + 0.01 * n for n in [0] + list(k_list) + [2 * k for k in k_list]},
                log_ratios={k: k ** (-a) * log_beta for k in k_list},
                max_divergence=0.0,
            )
        )
    return records


# ============================================================================
# Test Class: detect_peak
# ============================================================================

class TestDetectPeak:
    """Tests für detect_peak()."""

    def test_symmetric_vertex(self):
        """-(t-5)² auf {4.9, 5.0, 5.1} sollte T*=5.0 ergeben."""
        t = [4.9, 5.0, 5.1]
        peak = detect_peak(t, [-(x - 5.0) ** 2 for x in t])

        assert peak.t_star == pytest.approx(5.0, abs=1e-12)
        assert peak.index == 1
        assert not peak.at_boundary

    def test_refines_between_samples(self):
        """Scheitel zwischen Stützstellen sollte durch die Parabel getroffen werden."""
        t = np.linspace(0.0, 2.0, 21)
        peak = detect_peak(t, -(t - 1.03) ** 2)

        assert peak.refined
        assert peak.t_star == pytest.approx(1.03, abs=1e-12)

    def test_monotone_series_at_boundary(self):
        """Monoton steigende Reihe sollte T*=letztes t mit Randflag liefern."""
        t = np.linspace(0.0, 1.0, 11)
        peak = detect_peak(t, t ** 2)

        assert peak.t_star == 1.0
        assert peak.at_boundary
        assert not peak.refined

    def test_too_short(self):
        """Weniger als 3 Samples sollten PeakDetectionError auslösen."""
        with pytest.raises(PeakDetectionError):
            detect_peak([0.0, 1.0], [1.0, 2.0])

    def test_constant(self):
        """Konstante Reihe sollte PeakDetectionError auslösen."""
        with pytest.raises(PeakDetectionError):
            detect_peak([0.0, 1.0, 2.0], [3.0, 3.0, 3.0])

    def test_non_finite(self):
        """NaN in der Reihe sollte PeakDetectionError auslösen."""
        with pytest.raises(PeakDetectionError):
            detect_peak([0.0, 1.0, 2.0], [1.0, float("nan"), 0.5])


# ============================================================================
# Test Class: fit_gamma
# ============================================================================

class TestFitGamma:
    """Tests für fit_gamma()."""

    def test_two_point_hand_evaluation(self):
        """β ∈ {e⁻¹, e⁻²} mit R = β^0.5 sollte γ = 0.5 ergeben."""
        t = np.array([1.0 - math.exp(-1), 1.0 - math.exp(-2)])
        series = RatioSeries(t=t, log_ratios={1: 0.5 * np.log(1.0 - t)})

        fit = fit_gamma(series, 1, 1.0, 1e-3, min_samples=2)

        assert fit.gamma == pytest.approx(0.5, abs=1e-12)
        assert fit.n_samples == 2

    def test_unit_ratio_gives_zero(self):
        """R ≡ 1 sollte γ = 0 ergeben."""
        series = power_law_series([3])
        series = RatioSeries(t=series.t, log_ratios={3: np.zeros_like(series.t)})

        assert fit_gamma(series, 3, 1.0, 5e-4).gamma == 0.0

    def test_generator_recovery(self):
        """R = β^(5^-0.89) auf 10³ log-verteilten β sollte γ_5 bis 1e-10 treffen."""
        fit = fit_gamma(power_law_series([5]), 5, 1.0, 5e-4)

        assert fit.gamma == pytest.approx(5 ** (-A_TRUE), abs=1e-10)
        assert fit.residual_norm <= 1e-12
        assert fit.window == (0.0, 1.0 - 5e-4)

    @pytest.mark.parametrize("gamma", [-5.0, -1.3, 0.25, 2.7, 5.0])
    def test_exact_on_power_law(self, gamma):
        """Rauschfreie Potenzgesetze sollten für γ ∈ [-5, 5] exakt zurückkommen."""
        rng = np.random.default_rng(11)
        betas = np.sort(rng.uniform(0.01, 1.0, 200))
        t = np.sort(1.0 - betas)
        series = RatioSeries(t=t, log_ratios={2: gamma * np.log(1.0 - t)})

        fit = fit_gamma(series, 2, 1.0, 0.005)

        assert fit.gamma == pytest.approx(gamma, abs=1e-10)
        assert fit.residual_norm <= 1e-12

    def test_random_power_laws(self):
        """100 zufällige rauschfreie Instanzen sollten γ bis 1e-10 zurückgeben."""
        rng = np.random.default_rng(2024)
        for _ in range(100):
            gamma = float(rng.uniform(-5.0, 5.0))
            t_star = float(rng.uniform(2.0, 15.0))
            beta_min = float(rng.uniform(1e-4, 1e-2))
            betas = rng.uniform(beta_min, 1.0, int(rng.integers(20, 500)))
            t = np.sort(t_star - betas)
            series = RatioSeries(t=t, log_ratios={3: gamma * np.log(t_star - t)})

            fit = fit_gamma(series, 3, t_star, beta_min)

            assert fit.gamma == pytest.approx(gamma, abs=1e-10)

    def test_window_excludes_outside_samples(self):
        """Samples mit β < beta_min oder β > 1 sollten ignoriert werden."""
        t = np.linspace(-1.0, 0.999, 2000)
        beta = 1.0 - t
        log_ratio = np.where(beta <= 1.0 + 1e-6, 0.3 * np.log(beta), 99.0)
        log_ratio[beta < 0.05] = -99.0
        series = RatioSeries(t=t, log_ratios={4: log_ratio})

        fit = fit_gamma(series, 4, 1.0, 0.05)

        assert fit.gamma == pytest.approx(0.3, abs=1e-10)
        assert fit.n_samples < t.size // 2

    def test_too_few_samples(self):
        """Zu wenige Samples im Fenster sollten FitWindowError auslösen."""
        series = power_law_series([5], betas=np.linspace(0.1, 1.0, 5))

        with pytest.raises(FitWindowError):
            fit_gamma(series, 5, 1.0, 0.01)

    def test_non_positive_beta_min(self):
        """beta_min <= 0 sollte FitWindowError auslösen."""
        with pytest.raises(FitWindowError):
            fit_gamma(power_law_series([5]), 5, 1.0, 0.0)

    def test_unknown_order(self):
        """Fehlende Ordnung sollte AnalysisError auslösen."""
        with pytest.raises(AnalysisError):
            fit_gamma(power_law_series([5]), 7, 1.0, 5e-4)

    def test_intercept_mode(self):
        """Intercept-Modus sollte Steigung und Offset getrennt zurückgewinnen."""
        series = power_law_series([5])
        shifted = RatioSeries(t=series.t, log_ratios={5: series.log_ratios[5] + 0.2})

        fit = fit_gamma(shifted, 5, 1.0, 5e-4, intercept=True)

        assert fit.gamma == pytest.approx(5 ** (-A_TRUE), abs=1e-9)
        assert fit.intercept == pytest.approx(0.2, abs=1e-9)


class TestGammaBand:
    """Tests für gamma_uncertainty_band()."""

    def test_band_brackets_shifted_fits(self):
        """Band sollte die Fits bei T*-2dt und T*+2dt umfassen."""
        records = synthetic_records([5])
        series = RatioSeries.from_records(records)

        low, high = gamma_uncertainty_band(series, 5, 9.0, 0.01, 0.01)
        shifted = [fit_gamma(series, 5, 9.0 + s, 0.01).gamma for s in (-0.02, 0.02)]

        assert low == min(shifted)
        assert high == max(shifted)
        assert low < high


# ============================================================================
# Test Class: fit_alpha
# ============================================================================

class TestFitAlpha:
    """Tests für fit_alpha()."""

    def test_exact_inverse_law(self):
        """γ_k = 1/k für k ∈ {2,4,8} sollte a = 1 ergeben."""
        fit = fit_alpha({2: 0.5, 4: 0.25, 8: 0.125})

        assert fit.a == pytest.approx(1.0, abs=1e-12)
        assert fit.k_set == [2, 4, 8]
        assert max(abs(r) for r in fit.residuals) < 1e-14

    def test_default_orders(self):
        """γ_k = k^-0.89 für k=5j sollte a = 0.89 bis 1e-12 ergeben."""
        fit = fit_alpha([(k, k ** (-A_TRUE)) for k in K_DEFAULT])

        assert fit.a == pytest.approx(A_TRUE, abs=1e-12)
        assert len(fit.residuals) == 20

    def test_single_pair(self):
        """(k=10, γ=0.2) sollte a = -ln 0.2 / ln 10 ≈ 0.699 ergeben."""
        fit = fit_alpha([(10, 0.2)])

        assert fit.a == pytest.approx(-math.log(0.2) / math.log(10.0), abs=1e-14)
        assert round(fit.a, 3) == 0.699

    @pytest.mark.parametrize("a", [0.1, 0.5, 1.3, 2.0])
    def test_recovery(self, a):
        """fit_alpha sollte generierte Exponenten bis 1e-10 zurückgeben."""
        assert fit_alpha({k: k ** (-a) for k in K_DEFAULT}).a == pytest.approx(a, abs=1e-10)

    def test_random_exponents(self):
        """100 zufällige a ∈ [0.1, 2] mit k_j = 5j sollten bis 1e-10 zurückkommen."""
        rng = np.random.default_rng(89)
        for a in rng.uniform(0.1, 2.0, 100):
            fit = fit_alpha({k: k ** (-a) for k in K_DEFAULT})

            assert fit.a == pytest.approx(a, abs=1e-10)

    def test_non_positive_gamma(self):
        """γ_k <= 0 sollte NonPowerLawError auslösen."""
        with pytest.raises(NonPowerLawError, match="non-power-law"):
            fit_alpha({5: 0.3, 10: -0.1})

    def test_order_one_dropped(self):
        """k=1 trägt kein Gewicht und sollte entfernt werden."""
        fit = fit_alpha({1: 0.9, 2: 0.5, 4: 0.25})

        assert fit.k_set == [2, 4]
        assert fit.a == pytest.approx(1.0, abs=1e-12)

    def test_only_order_one(self):
        """Nur k=1 sollte AnalysisError auslösen."""
        with pytest.raises(AnalysisError):
            fit_alpha({1: 0.5})

    def test_intercept_mode(self):
        """Intercept-Modus sollte c·k^-a zurückgewinnen."""
        fit = fit_alpha({k: 1.5 * k ** (-0.7) for k in K_DEFAULT}, intercept=True)

        assert fit.a == pytest.approx(0.7, abs=1e-10)
        assert math.exp(fit.intercept) == pytest.approx(1.5, rel=1e-10)


# ============================================================================
# Test Class: Scale comparison
# ============================================================================

class TestScaleComparison:
    """Tests für epsilon_2k() und scale_comparison()."""

    def test_epsilon_values(self):
        """ε_2k sollte 8 für (1,1) und ≈5.669 für (10, 0.89) sein."""
        assert epsilon_2k(1, 1.0) == 8.0
        assert epsilon_2k(10, 0.89) == pytest.approx(44.0 / 10 ** 0.89, rel=1e-14)
        assert epsilon_2k(10, 0.89) == pytest.approx(5.669, abs=1e-3)

    def test_epsilon_lower_bound(self):
        """Für α <= 1 sollte ε_2k >= 4 für alle k gelten."""
        k = np.arange(1, 201)
        for alpha in (0.3, 0.89, 1.0):
            assert np.all(epsilon_2k(k, alpha) >= 4.0)

    def test_epsilon_lower_bound_up_to_a_million(self):
        """Für α = 1 sollte ε_2k >= 4 für k = 1..10⁶ gelten."""
        values = epsilon_2k(np.arange(1, 1_000_001), 1.0)

        assert values.shape == (1_000_000,)
        assert np.all(values >= 4.0)

    def test_epsilon_decreasing_for_unit_alpha(self):
        """Für α = 1 sollte ε_2k in k fallen."""
        values = epsilon_2k(np.arange(1, 201), 1.0)
        assert np.all(np.diff(values) <= 0)

    def test_zero_epsilon_not_dominant(self):
        """ε = 0 mit L > 0 sollte nicht dominant sein."""
        report = scale_comparison(50.0, 10, 0.89, epsilon=0.0)

        assert not report.dominant
        assert report.log_rho < report.log_r

    def test_large_epsilon_dominant(self):
        """ε >= 4 mit L > 0 sollte dominant sein."""
        report = scale_comparison(50.0, 10, 0.89)

        assert report.dominant
        assert report.regime == "dominant"
        assert report.log_r == pytest.approx(-50.0 / 21.5)

    def test_threshold_property(self):
        """Dominanz sollte genau für ε > 1/(2(2k+1)) gelten."""
        rng = np.random.default_rng(3)
        for _ in range(10_000):
            k = int(rng.integers(1, 101))
            eps = float(rng.uniform(0.0, 0.05))
            log_norm = float(rng.uniform(0.1, 500.0))
            threshold = 1.0 / (2 * (2 * k + 1))
            if abs(eps - threshold) < 1e-9:
                continue
            assert scale_comparison(log_norm, k, 0.89, epsilon=eps).dominant == (eps > threshold)

    def test_computed_epsilon_always_dominant(self):
        """10⁴ zufällige (k, α <= 1, L > 0) mit berechnetem ε_2k sollten dominant sein."""
        rng = np.random.default_rng(17)
        for _ in range(10_000):
            k = int(rng.integers(1, 1001))
            alpha = float(rng.uniform(-1.0, 1.0))
            log_norm = float(rng.uniform(1e-3, 1e4))

            report = scale_comparison(log_norm, k, alpha)

            threshold = 1.0 / (2 * (2 * k + 1))
            assert report.dominant
            assert report.dominant == (report.epsilon_2k > threshold)
            assert report.regime == "dominant"

    def test_huge_log_norm_stays_finite(self):
        """Sehr große Normen sollten im Log-Raum endlich bleiben."""
        report = scale_comparison(1e5, 100, 0.89)

        assert math.isfinite(report.log_r)
        assert math.isfinite(report.log_rho)

    def test_non_positive_log_norm_flagged(self):
        """L <= 0 sollte als eigenes Regime markiert werden."""
        report = scale_comparison(-2.0, 5, 0.89)

        assert not report.dominant
        assert report.regime == "log_norm_nonpositive"

    def test_non_finite_log_norm(self):
        """Nicht-endliche Norm sollte AnalysisError auslösen."""
        with pytest.raises(AnalysisError):
            scale_comparison(float("inf"), 5, 0.89)


# ============================================================================
# Test Class: analysis_pipeline
# ============================================================================

class TestAnalysisPipeline:
    """Tests für analysis_pipeline()."""

    def test_recovers_exponent_with_given_peak(self):
        """Synthetisches Gesetz mit T*=9 sollte a = 0.89 bis 1e-8 liefern."""
        report = analysis_pipeline(synthetic_records(K_DEFAULT), t_star=9.0)

        assert report.alpha_fit.a == pytest.approx(A_TRUE, abs=1e-8)
        assert len(report.gamma_fits) == 20
        assert report.peak is None
        assert report.scale_sample_t < 9.0

    def test_recovers_exponent_with_detected_peak(self):
        """Detektierter Peak sollte T* ≈ 9 und a ≈ 0.89 ergeben."""
        report = analysis_pipeline(synthetic_records([5, 10, 20]))

        assert report.t_star == pytest.approx(9.0, abs=1e-6)
        assert report.alpha_fit.a == pytest.approx(A_TRUE, abs=1e-4)
        assert not report.advisory
        assert set(report.gamma_bands) == {5, 10, 20}

    def test_scale_reports_use_last_pre_peak_record(self):
        """Skalenvergleich sollte die Norm des letzten Samples vor T* verwenden."""
        report = analysis_pipeline(synthetic_records([5, 10]), t_star=9.0)

        assert [r.k for r in report.scale_reports] == [5, 10]
        assert report.scale_reports[0].log_norm_2k == pytest.approx(1.1)
        assert all(r.dominant for r in report.scale_reports)

    def test_k_subset(self):
        """k_set sollte die gefitteten Ordnungen einschränken."""
        report = analysis_pipeline(synthetic_records([5, 10, 20]), k_set=[10, 20], t_star=9.0)

        assert report.alpha_fit.k_set == [10, 20]

    def test_missing_order(self):
        """Nicht vorhandene Ordnung sollte AnalysisError auslösen."""
        with pytest.raises(AnalysisError):
            analysis_pipeline(synthetic_records([5]), k_set=[7], t_star=9.0)

    def test_fewer_than_ten_pre_peak_samples(self):
        """Weniger als 10 Samples vor T* sollten FitWindowError auslösen."""
        records = synthetic_records([5], t_star=0.05, t_end=0.2)

        with pytest.raises(FitWindowError):
            analysis_pipeline(records, t_star=0.05)

    def test_empty_records(self):
        """Leere Recordliste sollte AnalysisError auslösen."""
        with pytest.raises(AnalysisError):
            analysis_pipeline([])

    def test_boundary_peak_is_advisory(self):
        """Peak am Reihenende sollte den Report als advisory markieren."""
        records = synthetic_records([5, 10], t_star=8.5, t_end=8.5)
        records = [r.model_copy(update={"enstrophy": 1.0 + r.t}) for r in records]

        report = analysis_pipeline(records, t_star=None, beta_min=0.01)

        assert report.advisory
        assert report.t_star == pytest.approx(8.5)
