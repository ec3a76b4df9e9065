import numpy as np
import torch
from django.test import SimpleTestCase

from apps.learning.networks import (
    NetSpec,
    build_drn,
    build_network,
    build_rc,
    estimate_channels,
    flops_count,
    forward,
    infer_shapes,
    pack_labels,
    pack_observations,
    param_count,
    pooled_height,
    unpack_labels,
)
from apps.utils.exceptions import DimensionError


class ArchitectureTests(SimpleTestCase):
    def test_rc_shapes_and_counts(self):
        spec = build_rc(15, 3)
        self.assertEqual(infer_shapes(spec)[-1][1], (3,))
        self.assertEqual(param_count(spec).weights, 92992 + 2 * 15 * 3)
        flops = flops_count(spec)
        self.assertTrue(flops.matches)
        self.assertEqual(flops.total, 92992 * 15 + 2 * 15 * 3)

    def test_drn_shapes_and_counts(self):
        spec = build_drn(15, 9, 9)
        self.assertEqual(spec.output_dims, (180,))
        self.assertEqual(pooled_height(15), 8)
        self.assertEqual(param_count(spec).weights, 576 + 124160 + 4 * 90 * 8)
        flops = flops_count(spec)
        self.assertTrue(flops.matches)
        self.assertEqual(flops.total, 374208 * 17 + 4 * 90 * 8)

    def test_plain_drn_drops_skip_multiplications(self):
        residual = flops_count(build_drn(15, 9, 9))
        plain = flops_count(build_drn(15, 9, 9, residual=False))
        self.assertIsNone(plain.closed_form)
        skips = (32 * 64 + 64 * 128 + 128 * 256) * 17 * 3
        self.assertEqual(residual.total - plain.total, skips)

    def test_rejects_degenerate_sizes(self):
        with self.assertRaises(DimensionError):
            build_rc(2, 3)
        with self.assertRaises(DimensionError):
            build_rc(15, 1)
        with self.assertRaises(DimensionError):
            build_drn(2, 9, 9)

    def test_empty_network_has_no_parameters(self):
        self.assertEqual(int(param_count(None)), 0)

    def test_spec_json_round_trip(self):
        spec = build_drn(5, 3, 2)
        self.assertEqual(NetSpec.from_json(spec.to_json()), spec)


class NetworkTests(SimpleTestCase):
    def test_forward_shapes(self):
        network = build_network(build_drn(5, 3, 2), seed=0)
        inputs = torch.zeros(4, 2, 5, 1, dtype=torch.float64)
        self.assertEqual(tuple(forward(network, inputs).shape), (4, 18))
        rc = build_network(build_rc(5, 3), seed=0)
        self.assertEqual(tuple(forward(rc, inputs).shape), (4, 3))

    def test_rejects_wrong_input_shape(self):
        network = build_network(build_drn(5, 3, 2), seed=0)
        with self.assertRaises(DimensionError):
            forward(network, torch.zeros(2, 2, 6, 1, dtype=torch.float64))

    def test_same_seed_same_weights(self):
        first = build_network(build_drn(5, 3, 2), seed=4)
        second = build_network(build_drn(5, 3, 2), seed=4)
        for a, b in zip(first.parameters(), second.parameters(), strict=True):
            self.assertTrue(torch.equal(a, b))

    def test_residual_and_plain_start_identical(self):
        residual = build_network(build_drn(5, 3, 2), seed=1)
        plain = build_network(build_drn(5, 3, 2, residual=False), seed=1)
        inputs = torch.randn(
            3, 2, 5, 1, generator=torch.Generator().manual_seed(0), dtype=torch.float64
        )
        self.assertTrue(torch.equal(forward(residual, inputs), forward(plain, inputs)))

    def test_single_precision(self):
        network = build_network(build_rc(5, 2), precision="float32")
        self.assertEqual(network.dtype, torch.float32)


class PackingTests(SimpleTestCase):
    def test_observation_layout(self):
        observations = np.array([[1 + 2j, 3 - 1j, 0.5j]])
        packed = pack_observations(observations)
        self.assertEqual(tuple(packed.shape), (1, 2, 3, 1))
        np.testing.assert_array_equal(packed[0, 0, :, 0].numpy(), [1.0, 3.0, 0.0])
        np.testing.assert_array_equal(packed[0, 1, :, 0].numpy(), [2.0, -1.0, 0.5])

    def test_label_layout(self):
        labels = np.array([[1 + 2j, 3 - 1j]])
        packed = pack_labels(labels)
        np.testing.assert_array_equal(packed.numpy(), [[1.0, 3.0, 2.0, -1.0]])
        np.testing.assert_array_equal(unpack_labels(packed), labels)

    def test_estimate_channels_in_batches(self):
        network = build_network(build_drn(5, 3, 2), seed=0)
        rng = np.random.default_rng(0)
        observations = rng.standard_normal((7, 5)) + 1j * rng.standard_normal((7, 5))
        chunked = estimate_channels(network, observations, batch_size=3)
        whole = estimate_channels(network, observations)
        self.assertEqual(chunked.shape, (7, 9))
        np.testing.assert_allclose(chunked, whole)
