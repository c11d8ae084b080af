import unittest

import numpy as np
import numpy.testing as npt
from pydantic import ValidationError

from amp_cs.errors import DimensionError, ParameterError
from amp_cs.models import ModelKind, NetConfig
from amp_cs.nets import (ampanet_forward, ampnet_forward, balanced_cnn_forward, count_parameters, forward,
                         init_ampanet_params, init_params, linear_baseline)
from amp_cs.tensor import Mode, Tensor, add, charbonnier, scale
from amp_cs.training import loss_ortho
from amp_cs.utils.gradcheck import check_gradients


def small_config(kind=ModelKind.AMP_NET, **changes):
    settings = dict(kind=kind, ratio=0.25, block_size=4, channels=4, stages=2, mlp_hidden=8, seed=3)
    settings.update(changes)
    return NetConfig(**settings)


def measurements(params, batch, seed=0):
    rng = np.random.default_rng(seed)
    return Tensor(rng.uniform(0, 1, size=(batch, params.n_p)) @ params.w_phi.data.T)


class TestAmpNet(unittest.TestCase):
    def test_shapes_and_counts(self):
        params = init_params(small_config())
        self.assertEqual((params.m_p, params.n_p), (4, 16))
        result = ampnet_forward(params, measurements(params, 3))
        self.assertEqual(result.x.shape, (3, 16))
        self.assertEqual(len(result.stages), 2)
        self.assertEqual(len(result.sym_residuals), 2)

    def test_zero_stages_have_only_the_linear_maps(self):
        params = init_params(small_config(stages=0))
        self.assertEqual(count_parameters(params), 2 * 4 * 16)
        y = measurements(params, 2)
        npt.assert_allclose(ampnet_forward(params, y).x.data, y.data @ params.w_q.data.T)

    def test_zero_cnn_returns_its_input(self):
        params = init_params(small_config())
        stage = params.stages[0]
        for conv in (stage.block1, stage.block2.conv_a, stage.block2.conv_b,
                     stage.block4.conv_a, stage.block4.conv_b, stage.block5):
            conv.zero_()
        r = Tensor(np.random.default_rng(1).normal(size=(5, 16)))
        x, _ = balanced_cnn_forward(stage, r, 4, Mode.EVAL)
        npt.assert_array_equal(x.data, r.data)

    def test_batch_consistency(self):
        params = init_params(small_config())
        y = measurements(params, 5)
        batched = ampnet_forward(params, y, Mode.EVAL).x.data
        for i in range(5):
            single = ampnet_forward(params, Tensor(y.data[i:i + 1]), Mode.EVAL).x.data
            npt.assert_allclose(single[0], batched[i], atol=1e-10)

    def test_zero_onsager_gives_plain_residual(self):
        params = init_params(small_config())
        for stage in params.stages:
            stage.onsager_phi.data[...] = 0.0
        y = measurements(params, 3)
        for x, z in ampnet_forward(params, y).stages:
            npt.assert_allclose(z.data, y.data - x.data @ params.w_phi.data.T, atol=1e-12)

    def test_linear_baseline_is_pinv(self):
        params = init_params(small_config(kind=ModelKind.AMPA_NET))
        baseline = linear_baseline(params)
        self.assertIsNone(baseline.init_attention)
        y = measurements(params, 3)
        x0 = y.data @ np.linalg.pinv(params.w_phi.data).T
        npt.assert_allclose(ampnet_forward(baseline, y).x.data, x0, atol=1e-10)
        # the source network is untouched
        self.assertIsNotNone(params.init_attention)
        self.assertTrue(np.any(params.stages[0].block1.weight.data != 0))

    def test_frozen_sensing(self):
        params = init_params(small_config(learn_phi=False, pinv_init=True))
        self.assertFalse(params.w_phi.trainable)
        self.assertFalse(params.w_q.trainable)
        npt.assert_allclose(params.w_q.data, np.linalg.pinv(params.w_phi.data))

    def test_rejects_wrong_measurement_width(self):
        params = init_params(small_config())
        with self.assertRaises(DimensionError):
            ampnet_forward(params, Tensor(np.ones((2, 5))))
        with self.assertRaises(DimensionError):
            balanced_cnn_forward(params.stages[0], Tensor(np.ones((2, 15))), 4)


class TestAmpaNet(unittest.TestCase):
    def test_attention_only_valid_for_ampa(self):
        with self.assertRaises(ValidationError):
            small_config(spatial_attention=True)
        with self.assertRaises(ParameterError):
            init_ampanet_params(small_config())
        with self.assertRaises(ParameterError):
            ampanet_forward(init_params(small_config()), Tensor(np.ones((1, 4))))

    def test_attention_leaves_shared_weights_unchanged(self):
        plain = init_params(small_config()).named_params()
        full = init_ampanet_params(small_config(kind=ModelKind.AMPA_NET)).named_params()
        self.assertTrue(set(plain) < set(full))
        for name, p in plain.items():
            npt.assert_array_equal(full[name].data, p.data, err_msg=name)
        self.assertIn("init_attention.fc1.weight", full)
        self.assertIn("stage1.spatial_attention.conv.weight", full)

    def test_neutral_attention_matches_rescaled_ampnet(self):
        """
        Zero attention towers gate every feature by sigmoid(0)^2 = 1/4, and a
        zero second MLP layer weights x0 uniformly by 1/n_p.
        """
        ampa = init_ampanet_params(small_config(kind=ModelKind.AMPA_NET))
        ampa.init_attention.fc2.weight.data[...] = 0.0
        ampa.init_attention.fc2.bias.data[...] = 0.0
        for stage in ampa.stages:
            stage.channel_attention.zero_()
            stage.spatial_attention.zero_()

        amp = init_params(small_config())
        source = ampa.named_params()
        for name, p in amp.named_params().items():
            p.data[...] = source[name].data
        amp.w_q.data[...] /= amp.n_p
        for stage in amp.stages:
            stage.block5.weight.data[...] *= 0.25

        y = measurements(ampa, 4)
        npt.assert_allclose(forward(ampa, y, Mode.EVAL).x.data, forward(amp, y, Mode.EVAL).x.data, atol=1e-10)


class TestNetworkGradients(unittest.TestCase):
    def gradcheck(self, params, mode, batch):
        rng = np.random.default_rng(11)
        target = Tensor(rng.uniform(0, 1, size=(batch, params.n_p)))
        y = Tensor(target.data @ params.w_phi.data.T)

        def build_loss():
            result = forward(params, y, mode, with_symmetry=True)
            return add(charbonnier(result.x, target), scale(loss_ortho(result.sym_residuals), 0.01))

        trainable = [p for p in params.params() if p.trainable]
        return check_gradients(build_loss, trainable, max_entries=2)

    def test_ampnet_train_mode(self):
        params = init_params(small_config(block_size=9, channels=4, inner_relu=True))
        self.assertLess(self.gradcheck(params, Mode.TRAIN, batch=4), 1e-3)

    def test_trainable_set_spans_every_component(self):
        params = init_ampanet_params(small_config(kind=ModelKind.AMPA_NET, block_size=9))
        names = {p.name for p in params.params() if p.trainable}
        for expected in ("w_phi", "w_q", "init_attention.fc2.bias", "stage1.onsager_phi",
                         "stage1.block2.bn.beta", "stage1.block5.bias", "stage0.channel_attention.bn.gamma",
                         "stage0.spatial_attention.conv.bias"):
            self.assertIn(expected, names)

    def test_ampnet_sigmoid_train_mode(self):
        params = init_params(small_config(block_size=9, activation="sigmoid"))
        self.assertLess(self.gradcheck(params, Mode.TRAIN, batch=3), 1e-3)

    def test_ampanet_eval_mode(self):
        params = init_ampanet_params(small_config(kind=ModelKind.AMPA_NET, block_size=9, channels=4,
                                                  mlp_hidden=8))
        self.assertLess(self.gradcheck(params, Mode.EVAL, batch=2), 1e-3)


if __name__ == "__main__":
    unittest.main()
