import numpy as np
from django.test import SimpleTestCase

from apps.estimation.pilots import (
    PER_SLOT,
    PilotConfig,
    build_pilot,
    complex_noise,
    crlb,
    dft_phase_matrix,
    ls_error_split,
    ls_estimate,
    ls_mse_closed_form,
    ls_operator,
    mmse_weight,
    nmse,
    nmse_per_sample,
    noise_var_for_snr,
    random_beamformer,
    simulate_pilot,
)
from apps.utils.exceptions import DimensionError, EstimationError


def random_channels(rng, count, dim):
    shape = (count, dim)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


class PilotDesignTests(SimpleTestCase):
    def test_dft_phases(self):
        phases = dft_phase_matrix(15, 9)
        self.assertEqual(phases.shape, (15, 10))
        np.testing.assert_allclose(np.abs(phases), 1.0)
        np.testing.assert_allclose(phases[:, 0], 1.0)

    def test_shared_sensing_matrix_shape(self):
        pilot = build_pilot(15, 9, 9, np.random.default_rng(0))
        self.assertEqual(pilot.sensing_matrix().shape, (15, 90))
        self.assertEqual(pilot.label_size, 90)
        self.assertFalse(pilot.per_slot)

    def test_per_slot_design_has_full_rank(self):
        pilot = build_pilot(30, 3, 5, np.random.default_rng(4), sensing=PER_SLOT)
        A = pilot.sensing_matrix()
        self.assertEqual(A.shape, (30, 18))
        self.assertEqual(np.linalg.matrix_rank(A), 18)

    def test_rejects_non_unit_phases(self):
        phases = dft_phase_matrix(4, 2)
        phases[1, 1] = 0.5
        with self.assertRaises(EstimationError):
            PilotConfig(4, phases, random_beamformer(3, np.random.default_rng(0)))

    def test_rejects_unknown_sensing(self):
        with self.assertRaises(EstimationError):
            build_pilot(4, 3, 2, np.random.default_rng(0), sensing="random")


class LeastSquaresTests(SimpleTestCase):
    def test_noiseless_ls_reproduces_observation(self):
        rng = np.random.default_rng(1)
        pilot = build_pilot(10, 9, 9, rng)
        A = pilot.sensing_matrix()
        h = random_channels(rng, 1, 90)[0]
        measurement = simulate_pilot(h, pilot, rng)
        solution = ls_estimate(A, measurement.y)
        self.assertFalse(solution.regularized)
        np.testing.assert_allclose(A @ solution.estimate, measurement.y, atol=1e-9)

    def test_error_matches_closed_form(self):
        rng = np.random.default_rng(2)
        A = build_pilot(10, 9, 9, rng).sensing_matrix()
        noise_var = 0.3
        noise = complex_noise(rng, noise_var, (10000, 10))
        errors = np.sum(np.abs(ls_operator(A).apply(noise)) ** 2, axis=1)
        expected = ls_mse_closed_form(A, noise_var)
        self.assertLess(abs(errors.mean() - expected) / expected, 0.05)

    def test_error_split_adds_up(self):
        rng = np.random.default_rng(3)
        pilot = build_pilot(12, 3, 5, rng).with_noise(0.1)
        A = pilot.sensing_matrix()
        h = random_channels(rng, 1, 18)[0]
        estimate = ls_estimate(A, simulate_pilot(h, pilot, rng).y).estimate
        split = ls_error_split(A, estimate, h)
        self.assertAlmostEqual(
            split.total, float(np.sum(np.abs(estimate - h) ** 2)), places=9
        )
        self.assertGreater(split.null_space_error, 0.0)

    def test_rank_deficient_gram_uses_pseudoinverse(self):
        A = np.ones((3, 4), dtype=np.complex128)
        with self.assertLogs("apps.estimation.pilots", level="WARNING") as logs:
            operator = ls_operator(A)
        self.assertIn("pseudoinverse", logs.output[0])
        self.assertTrue(operator.regularized)
        self.assertEqual(operator.rank, 1)

    def test_full_rank_gram_does_not_warn(self):
        A = build_pilot(10, 9, 9, np.random.default_rng(8)).sensing_matrix()
        with self.assertNoLogs("apps.estimation.pilots", level="WARNING"):
            self.assertFalse(ls_operator(A).regularized)

    def test_observation_length_mismatch(self):
        with self.assertRaises(DimensionError):
            ls_estimate(np.ones((3, 4)), np.ones(5))


class MmseTests(SimpleTestCase):
    def test_noiseless_weight_is_identity(self):
        rng = np.random.default_rng(5)
        truths = random_channels(rng, 200, 10)
        weight = mmse_weight(truths, truths, noise_var=0.0)
        np.testing.assert_allclose(weight.apply(truths), truths, atol=1e-8)
        self.assertFalse(weight.undersampled)

    def test_flags_undersampled_correlations(self):
        rng = np.random.default_rng(6)
        truths = random_channels(rng, 5, 10)
        with self.assertLogs("apps.estimation.pilots", level="WARNING"):
            weight = mmse_weight(truths, truths, noise_var=0.1)
        self.assertTrue(weight.undersampled)

    def test_mmse_not_worse_than_ls_on_held_out_samples(self):
        rng = np.random.default_rng(7)
        pilot = build_pilot(10, 3, 4, rng).with_noise(0.5)
        A = pilot.sensing_matrix()
        ls = ls_operator(A)

        def draw(count):
            truths = random_channels(rng, count, 15)
            ys = truths @ A.T + complex_noise(rng, 0.5, (count, 10))
            return ls.apply(ys), truths

        fit_ls, fit_truths = draw(4000)
        weight = mmse_weight(fit_ls, fit_truths, noise_var=0.5)
        held_ls, held_truths = draw(2000)
        self.assertLessEqual(
            np.mean(nmse_per_sample(weight.apply(held_ls), held_truths)),
            np.mean(nmse_per_sample(held_ls, held_truths)),
        )


class ReferenceTests(SimpleTestCase):
    def test_crlb_closed_form(self):
        self.assertEqual(crlb(9, 9, 15, 1.0), 12.0)
        self.assertEqual(crlb(9, 9, 30, 1.0), 6.0)
        self.assertEqual(crlb(9, 9, 15, 2.0), 24.0)

    def test_noise_for_snr(self):
        self.assertAlmostEqual(noise_var_for_snr(1.0, 10.0), 0.1)
        self.assertEqual(noise_var_for_snr(1.0, float("inf")), 0.0)

    def test_nmse(self):
        truth = np.array([1.0, 1.0j])
        self.assertAlmostEqual(nmse(truth * 1.1, truth), 0.01)
        with self.assertRaises(EstimationError):
            nmse(truth, np.zeros(2))
        with self.assertRaises(DimensionError):
            nmse(truth, np.ones(3))
