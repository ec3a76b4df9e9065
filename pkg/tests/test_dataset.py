import struct
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.estimation.pilots import signal_power
from apps.experiments import dataset as ds
from apps.utils.exceptions import ChecksumError, DatasetError, FormatVersionError
from apps.utils.seeding import numpy_rng
from tests.factories import BASE_ENTRIES, make_scenario

SINGLE_REGION = tuple(key for key in BASE_ENTRIES if key.startswith("region2_"))


class GenerationTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.scenario = make_scenario()
        cls.dataset = ds.generate(cls.scenario)

    def test_shapes_and_bookkeeping(self):
        data = self.dataset
        self.assertEqual(len(data), 100)
        self.assertEqual(data.observations.shape, (100, 6))
        self.assertEqual(data.labels.shape, (100, 36))
        self.assertIsNone(data.truths)
        self.assertEqual(np.bincount(data.region_ids).tolist(), [50, 50])
        self.assertEqual(data.clients(), [(0, 0), (0, 1), (1, 0), (1, 1)])
        self.assertTrue(set(data.snr_db) <= {0.0, 10.0})

    def test_labels_normalized_to_unit_power(self):
        power = np.mean(np.sum(np.abs(self.dataset.labels) ** 2, axis=1))
        self.assertAlmostEqual(power, 1.0, places=10)

    def test_same_seed_same_dataset(self):
        again = ds.generate(self.scenario, workers=3)
        np.testing.assert_array_equal(again.observations, self.dataset.observations)
        np.testing.assert_array_equal(again.labels, self.dataset.labels)
        np.testing.assert_array_equal(again.snr_db, self.dataset.snr_db)

    def test_other_seed_other_dataset(self):
        other = ds.generate(make_scenario(seed=12))
        self.assertFalse(np.allclose(other.labels, self.dataset.labels))

    def test_head_per_client(self):
        head = self.dataset.head_per_client(5)
        self.assertEqual(len(head), 20)
        self.assertEqual(len(head.client(1, 0)), 5)

    def test_ls_labels_keep_true_channels(self):
        data = ds.generate(make_scenario(labels="ls"))
        self.assertIsNotNone(data.truths)
        self.assertIs(data.ground_truth, data.truths)
        self.assertFalse(np.allclose(data.labels, data.truths))

    def test_far_field_mode(self):
        data = ds.generate(make_scenario(mode="ff"))
        self.assertEqual(data.labels.shape, (100, 36))

    def test_single_sample_scenario(self):
        scenario = make_scenario(
            drop=SINGLE_REGION, regions=1, samples_per_user=1, users_per_region=1
        )
        data = ds.generate(scenario)
        self.assertEqual(len(data), 1)
        with self.assertRaises(DatasetError):
            ds.split(data)


class ObservationTests(SimpleTestCase):
    def setUp(self):
        self.scenario = make_scenario()
        self.pilot = ds.scenario_pilot(self.scenario, 6)
        rng = np.random.default_rng(0)
        shape = (4000, 36)
        self.truths = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    def test_pilot_is_shared_between_callers(self):
        again = ds.scenario_pilot(self.scenario, 6)
        np.testing.assert_array_equal(
            again.sensing_matrix(), self.pilot.sensing_matrix()
        )

    def test_noiseless_observation(self):
        y = ds.observe(
            self.pilot, self.truths, np.full(4000, np.inf), numpy_rng(0, "noise")
        )
        np.testing.assert_allclose(y, self.truths @ self.pilot.sensing_matrix().T)

    def test_noise_follows_snr(self):
        A = self.pilot.sensing_matrix()
        power = signal_power(A, self.truths)
        y = ds.observe(self.pilot, self.truths, np.full(4000, 10.0), numpy_rng(0, "n"))
        noise = y - self.truths @ A.T
        measured = np.mean(np.abs(noise) ** 2)
        self.assertLess(abs(measured / (power / 10.0) - 1.0), 0.05)


class SplitTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = ds.generate(make_scenario(samples_per_user=250))

    def test_split_sizes_and_disjointness(self):
        train, val, test = ds.split(self.dataset)
        self.assertEqual((len(train), len(val), len(test)), (800, 100, 100))
        keys = [tuple(part.observations[:, 0]) for part in (train, val, test)]
        self.assertEqual(len(set().union(*map(set, keys))), 1000)

    def test_split_keeps_region_proportions(self):
        _, _, test = ds.split(self.dataset)
        counts = np.bincount(test.region_ids)
        self.assertLessEqual(abs(int(counts[0]) - 50), 2)
        self.assertEqual(int(counts.sum()), 100)

    def test_split_is_reproducible(self):
        first = ds.split(self.dataset)[2]
        second = ds.split(self.dataset)[2]
        np.testing.assert_array_equal(first.observations, second.observations)

    def test_invalid_fractions(self):
        with self.assertRaises(DatasetError):
            ds.split(self.dataset, (0.5, 0.5, 0.0))
        with self.assertRaises(DatasetError):
            ds.split(self.dataset, (0.5, 0.3, 0.3))


class FileFormatTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = ds.generate(make_scenario(labels="ls"))

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = Path(self.tmp.name) / "datasets" / "train.nfce"
        ds.save(self.dataset, self.path)

    def test_round_trip(self):
        loaded = ds.load(self.path)
        for name in ("observations", "labels", "truths", "region_ids", "user_ids"):
            np.testing.assert_array_equal(
                getattr(loaded, name), getattr(self.dataset, name)
            )
        self.assertEqual(loaded.scaler, self.dataset.scaler)
        self.assertEqual(
            loaded.scenario.manifest_hash, self.dataset.scenario.manifest_hash
        )

    def test_corrupted_record(self):
        payload = bytearray(self.path.read_bytes())
        payload[len(payload) // 2] ^= 0xFF
        self.path.write_bytes(bytes(payload))
        with self.assertRaises(ChecksumError):
            ds.load(self.path)

    def test_unsupported_version(self):
        payload = bytearray(self.path.read_bytes())
        payload[4:8] = struct.pack("<I", ds.VERSION + 1)
        self.path.write_bytes(bytes(payload))
        with self.assertRaises(FormatVersionError):
            ds.load(self.path)

    def test_not_a_dataset(self):
        self.path.write_bytes(b"PK\x03\x04" + bytes(32))
        with self.assertRaises(DatasetError):
            ds.load(self.path)
        self.path.write_bytes(b"NFCE")
        with self.assertRaises(DatasetError):
            ds.load(self.path)

    def test_missing_file(self):
        with self.assertRaises(DatasetError):
            ds.load(Path(self.tmp.name) / "absent.nfce")
