import numpy as np
import pytest

from deconfound import simulation as sim
from deconfound.errors import DegenerateDataError, ValidationError
from deconfound.seeds import subseed


class TestScenario:
    def test_presets(self):
        weak = sim.scenario_preset("weak")
        strong = sim.scenario_preset("strong", separable=False)
        assert (weak.alpha3, weak.alpha4) == (50.0, 50.0)
        assert (strong.alpha3, strong.alpha4) == (1000.0, 1000.0)
        assert weak.alpha1 == weak.alpha2 == 10.0
        assert not strong.separability

    def test_invariants(self):
        with pytest.raises(ValidationError):
            sim.SimulationScenario(n=50)
        with pytest.raises(ValidationError):
            sim.SimulationScenario(d_R=4)
        with pytest.raises(ValidationError):
            sim.scenario_preset("mild")


class TestLatents:
    def test_zero_correlation(self):
        sc = sim.SimulationScenario(n=5000, latent_corr=0.0, seed=1)
        t, h1, h2 = sim.generate_latents(sc)
        assert abs(np.corrcoef(t, h1)[0, 1]) < 0.05

    def test_nonseparable_identity(self):
        sc = sim.SimulationScenario(n=500, separability=False, seed=2)
        t, h1, _ = sim.generate_latents(sc)
        np.testing.assert_array_equal(t, h1)

    def test_determinism(self):
        sc = sim.SimulationScenario(n=300, seed=3)
        a = sim.generate_latents(sc)
        b = sim.generate_latents(sc)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_h2_bounded(self):
        sc = sim.SimulationScenario(n=400, seed=4)
        *_, h2 = sim.generate_latents(sc)
        assert np.all(np.abs(h2) <= 1.0)


class TestRepresentations:
    def test_probe_recovers_treatment(self):
        sc = sim.SimulationScenario(n=2000, seed=5)
        t, h1, h2 = sim.generate_latents(sc)
        R = sim.generate_representations(t, h1, h2, sc.d_R, seed=11)
        acc_t, acc_h1, r2_h2 = sim._linear_probe_scores(R, t, h1, h2)
        assert acc_t >= 0.95 and acc_h1 >= 0.95 and r2_h2 >= 0.95

    def test_bit_identical_given_seed(self):
        sc = sim.SimulationScenario(n=1000, seed=6)
        t, h1, h2 = sim.generate_latents(sc)
        a = sim.generate_representations(t, h1, h2, 32, seed=7)
        b = sim.generate_representations(t, h1, h2, 32, seed=7)
        np.testing.assert_array_equal(a, b)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            sim.generate_representations(np.zeros(3), np.zeros(2), np.zeros(3),
                                         16, seed=8)


class TestOutcome:
    def test_hand_value_minus_30(self):
        sc = sim.SimulationScenario(alpha1=10, alpha2=10, alpha3=50, alpha4=50,
                                    n=100, noise_sd=0.0, seed=0)
        y = sim.generate_outcome(np.ones(1), np.ones(1), np.zeros(1), sc, seed=1)
        assert y[0] == -30.0

    def test_all_zero_case(self):
        sc = sim.SimulationScenario(noise_sd=0.0, seed=0)
        y = sim.generate_outcome(np.zeros(1), np.zeros(1), np.zeros(1), sc, seed=1)
        assert y[0] == 0.0

    def test_no_interaction_truth(self):
        sc = sim.SimulationScenario(alpha2=0.0, seed=9)
        truth = sim.draw_truth(sc)
        assert truth.true_tau == sc.alpha1


class TestTruth:
    def test_true_tau_consistency(self):
        sc = sim.scenario_preset("moderate", seed=10)
        truth = sim.draw_truth(sc)
        assert truth.true_tau == sc.alpha1 + sc.alpha2 * float(np.mean(truth.h1))


class TestPerceived:
    def test_full_compliance(self):
        sc = sim.SimulationScenario(compliance_rate=1.0, seed=11)
        truth_t = np.array([0, 1, 1, 0])
        tt, compliers = sim.generate_perceived(truth_t, np.zeros(4), sc, seed=3)
        np.testing.assert_array_equal(tt, truth_t)
        assert compliers.all()

    def test_compliance_rate_matches(self):
        sc = sim.SimulationScenario(n=5000, compliance_rate=0.6, seed=12)
        t = np.ones(5000, dtype=int)
        tt, _ = sim.generate_perceived(t, np.zeros(5000), sc, seed=4)
        assert abs(tt.mean() - 0.6) < 0.03

    def test_one_sided(self):
        sc = sim.SimulationScenario(compliance_rate=0.5, seed=13)
        t = np.zeros(200, dtype=int)
        tt, _ = sim.generate_perceived(t, np.zeros(200), sc, seed=5)
        assert not tt.any()

    def test_requires_iv_block(self):
        sc = sim.SimulationScenario(seed=14)
        with pytest.raises(ValidationError):
            sim.generate_perceived(np.zeros(4), np.zeros(4), sc, seed=0)


class TestTrueLate:
    def test_hand_value_complier_mean(self):
        sc = sim.SimulationScenario(alpha1=10, alpha2=10, compliance_rate=0.9, seed=15)
        truth = sim.SyntheticTruth(
            t=np.ones(5, dtype=int),
            h1=np.array([1, 1, 0, 0, 0]),
            h2=np.zeros(5), true_tau=0.0,
            complier_mask=np.array([True, True, True, True, True]),
        )
        # complier mean(h1) = 0.4 -> beta = 10 + 10*0.4 = 14
        assert sim.true_late(sc, truth) == 14.0

    def test_empty_complier_set(self):
        sc = sim.SimulationScenario(compliance_rate=0.5, seed=16)
        truth = sim.SyntheticTruth(t=np.ones(3, dtype=int), h1=np.zeros(3),
                                   h2=np.zeros(3), true_tau=0.0,
                                   complier_mask=np.zeros(3, dtype=bool))
        with pytest.raises(DegenerateDataError):
            sim.true_late(sc, truth)


class TestMonteCarlo:
    def test_trial_floor(self):
        sc = sim.scenario_preset("weak", n=200, d_R=16, seed=17)
        with pytest.raises(ValidationError):
            sim.run_monte_carlo(sc, sim.EstimatorSpec(method="oracle"), trials=10)

    def test_conditional_reproducibility(self):
        sc = sim.scenario_preset("weak", n=300, d_R=16, seed=18)
        spec = sim.EstimatorSpec(method="oracle")
        a = sim.run_monte_carlo(sc, spec, trials=50)
        b = sim.run_monte_carlo(sc, spec, trials=50)
        assert [r.estimate for r in a.trials] == [r.estimate for r in b.trials]
        assert a.true_value == b.true_value

    def test_oracle_reasonable(self):
        sc = sim.scenario_preset("weak", n=1000, d_R=16, seed=19)
        rep = sim.run_monte_carlo(sc, sim.EstimatorSpec(method="oracle"), trials=60)
        assert rep.n_failures == 0
        assert abs(rep.bias) < 0.5

    def test_diff_in_means_confounded(self):
        sc = sim.scenario_preset("weak", n=1000, d_R=16, seed=20)
        dim = sim.run_monte_carlo(sc, sim.EstimatorSpec(method="diff_in_means"), trials=50)
        oracle = sim.run_monte_carlo(sc, sim.EstimatorSpec(method="oracle"), trials=50)
        assert abs(dim.bias) > 2 * abs(oracle.bias)


class TestOraclePropensity:
    def test_closed_form_matches_monte_carlo(self):
        sc = sim.SimulationScenario(n=200_000, latent_corr=0.5, seed=21)
        t, h1, _ = sim.generate_latents(sc)
        p1 = sim.true_propensity(sc, np.array([1]))[0]
        assert abs(t[h1 == 1].mean() - p1) < 0.01

    def test_degenerate_when_nonseparable(self):
        sc = sim.SimulationScenario(separability=False, seed=22)
        with pytest.raises(DegenerateDataError):
            sim.true_propensity(sc, np.array([0, 1]))
