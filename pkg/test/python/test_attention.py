import unittest

import numpy as np
import numpy.testing as npt

from amp_cs.errors import DimensionError
from amp_cs.nets import (ChannelAttentionParams, InitAttentionParams, SpatialAttentionParams, channel_attention,
                         init_attention, spatial_attention)
from amp_cs.tensor import Mode, Tensor, mul, pool_global, sum as tsum
from amp_cs.utils.gradcheck import check_gradients


class TestAttention(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(9)

    def test_channel_gate_ignores_pixel_order(self):
        p = ChannelAttentionParams.create("ca", 8, self.rng)
        features = self.rng.normal(size=(3, 8, 5, 5))
        order = self.rng.permutation(25)
        shuffled = features.reshape(3, 8, 25)[..., order].reshape(3, 8, 5, 5)

        out = channel_attention(p, Tensor(features), Mode.EVAL).data
        out_shuffled = channel_attention(p, Tensor(shuffled), Mode.EVAL).data
        npt.assert_allclose(out_shuffled, out.reshape(3, 8, 25)[..., order].reshape(3, 8, 5, 5), atol=1e-12)

    def test_gates_lie_in_unit_interval(self):
        features = np.abs(self.rng.normal(size=(2, 4, 6, 6))) + 0.1
        ca = ChannelAttentionParams.create("ca", 4, self.rng)
        sa = SpatialAttentionParams.create("sa", 4, self.rng)
        for out in (channel_attention(ca, Tensor(features), Mode.TRAIN).data,
                    spatial_attention(sa, Tensor(features)).data):
            ratio = out / features
            self.assertTrue(np.all((ratio > 0) & (ratio < 1)))

    def test_channel_tower_width(self):
        self.assertEqual(ChannelAttentionParams.create("ca", 32, self.rng).conv_a.weight.shape, (8, 32, 3, 3))
        self.assertEqual(ChannelAttentionParams.create("ca", 2, self.rng).conv_a.weight.shape, (1, 2, 3, 3))

    def test_zeroed_gates_halve_features(self):
        features = self.rng.normal(size=(2, 4, 3, 3))
        ca = ChannelAttentionParams.create("ca", 4, self.rng)
        sa = SpatialAttentionParams.create("sa", 4, self.rng)
        ca.zero_()
        sa.zero_()
        npt.assert_allclose(channel_attention(ca, Tensor(features), Mode.EVAL).data, features / 2)
        npt.assert_allclose(spatial_attention(sa, Tensor(features)).data, features / 2)

    def test_init_attention_weights_rows(self):
        p = InitAttentionParams.create(4, 9, 6, self.rng)
        y = Tensor(self.rng.normal(size=(3, 4)))
        x0 = Tensor(np.ones((3, 9)))
        out = init_attention(p, y, x0).data
        npt.assert_allclose(out.sum(axis=1), np.ones(3), atol=1e-12)
        self.assertTrue(np.all(out > 0))

    def test_zero_features_give_zero_output(self):
        zeros = Tensor(np.zeros((2, 4, 5, 5)))
        ca = ChannelAttentionParams.create("ca", 4, self.rng)
        sa = SpatialAttentionParams.create("sa", 4, self.rng)
        ca.conv_b.bias.data[...] = 3.0
        sa.conv.bias.data[...] = -2.0
        npt.assert_array_equal(channel_attention(ca, zeros, Mode.EVAL).data, np.zeros((2, 4, 5, 5)))
        npt.assert_array_equal(spatial_attention(sa, zeros).data, np.zeros((2, 4, 5, 5)))

    def test_spatial_gate_follows_channel_order(self):
        sa = SpatialAttentionParams.create("sa", 6, self.rng)
        features = self.rng.normal(size=(2, 6, 5, 5))
        order = self.rng.permutation(6)
        out = spatial_attention(sa, Tensor(features)).data
        npt.assert_allclose(spatial_attention(sa, Tensor(features[:, order])).data, out[:, order], atol=1e-12)

    def test_channel_gate_tracks_statistics_once(self):
        ca = ChannelAttentionParams.create("ca", 4, self.rng)
        features = Tensor(self.rng.normal(1.0, 2.0, size=(3, 4, 5, 5)))
        hidden = ca.conv_a(pool_global(features, "spatial", "avg")).data
        channel_attention(ca, features, Mode.TRAIN)
        npt.assert_allclose(ca.bn.state.running_mean, 0.1 * hidden.mean(axis=(0, 2, 3)), atol=1e-12)
        npt.assert_allclose(ca.bn.state.running_var, 0.9 + 0.1 * hidden.var(axis=(0, 2, 3)), atol=1e-12)

    def test_gradients(self):
        weights = self.rng.normal(size=(2, 4, 5, 5))
        features = Tensor(self.rng.normal(size=(2, 4, 5, 5)), requires_grad=True)
        sa = SpatialAttentionParams.create("sa", 4, self.rng)
        err = check_gradients(lambda: tsum(mul(spatial_attention(sa, features), weights)),
                              [features, *sa.params()])
        self.assertLess(err, 1e-3)

        ca = ChannelAttentionParams.create("ca", 4, self.rng)
        for mode in (Mode.TRAIN, Mode.EVAL):
            with self.subTest(mode=mode):
                err = check_gradients(lambda: tsum(mul(channel_attention(ca, features, mode), weights)),
                                      [features, *ca.params()])
                self.assertLess(err, 1e-3)

    def test_shape_errors(self):
        ca = ChannelAttentionParams.create("ca", 4, self.rng)
        sa = SpatialAttentionParams.create("sa", 4, self.rng)
        with self.assertRaises(DimensionError):
            channel_attention(ca, Tensor(np.ones((1, 3, 4, 4))))
        with self.assertRaises(DimensionError):
            spatial_attention(sa, Tensor(np.ones((4, 4))))
        p = InitAttentionParams.create(4, 9, 6, self.rng)
        with self.assertRaises(DimensionError):
            init_attention(p, Tensor(np.ones((2, 4))), Tensor(np.ones((3, 9))))
        with self.assertRaises(DimensionError):
            init_attention(p, Tensor(np.ones((2, 5))), Tensor(np.ones((2, 9))))


if __name__ == "__main__":
    unittest.main()
