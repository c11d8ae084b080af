import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
import numpy.testing as npt

from amp_cs.checkpoint import load_checkpoint
from amp_cs.data import synthetic_blocks
from amp_cs.errors import DataError, DimensionError, NumericError, ParameterError
from amp_cs.models import ModelKind, NetConfig, TrainConfig
from amp_cs.nets import init_params
from amp_cs.optim import Adam
from amp_cs.tensor import Param, Tape, Tensor, backward, mul, sum as tsum
from amp_cs.training import (loss_ortho, loss_recon, loss_total, mean_symmetry_residual, train, train_step)


def small_train_config(**changes):
    net = NetConfig(kind=ModelKind.AMP_NET, ratio=0.25, block_size=4, channels=4, stages=2, seed=1)
    settings = dict(net=net, lr=2e-3, batch_size=16, epochs=8, seed=1)
    settings.update(changes)
    return TrainConfig(**settings)


class TestLosses(unittest.TestCase):
    def test_total_combines_terms(self):
        total = loss_total(Tensor(1.0), Tensor(2.0), 0.01)
        self.assertAlmostEqual(total.item(), 1.02)
        self.assertAlmostEqual(loss_total(Tensor(1.0), Tensor(2.0), 0.0).item(), 1.0)

    def test_zero_lambda_isolates_symmetry_gradient(self):
        a, b = Param("a", [1.0, 2.0]), Param("b", [3.0])
        with Tape() as tape:
            total = loss_total(tsum(mul(a, a)), tsum(mul(b, 5.0)), 0.0)
        backward(total, tape, [a, b])
        npt.assert_array_equal(b.grad, [0.0])
        npt.assert_allclose(a.grad, [2.0, 4.0])

    def test_recon_and_ortho(self):
        x = Tensor(np.full((2, 3), 0.5))
        self.assertAlmostEqual(loss_recon(x, x, 1e-3).item(), 1e-3)
        self.assertAlmostEqual(loss_ortho([Tensor(0.5), Tensor(0.25)]).item(), 0.75)
        with self.assertRaises(ParameterError):
            loss_ortho([])


class TestTraining(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.blocks = synthetic_blocks(64, 4, seed=2)

    def tearDown(self):
        self.tmp.cleanup()

    def test_short_run_lowers_loss(self):
        path = Path(self.tmp.name) / "amp-net_0.25.ampck"
        epochs = []
        result = train(small_train_config(), self.blocks, checkpoint_path=path, on_epoch=epochs.append)

        self.assertEqual(len(result.history), 8)
        self.assertEqual([r.epoch for r in epochs], list(range(1, 9)))
        self.assertLess(result.history[-1].total, result.history[0].total)
        self.assertTrue(math.isfinite(result.final_loss.total))
        self.assertEqual(result.optimizer.t, 8 * 4)

        stored = load_checkpoint(path)
        self.assertEqual(stored.manifest.epoch, 8)
        self.assertEqual(len(stored.manifest.history), 8)
        npt.assert_array_equal(stored.tensors["param/w_phi"], result.params.w_phi.data)

    def test_zero_corpus_gives_finite_losses(self):
        result = train(small_train_config(epochs=1), np.zeros((64, 16)))
        self.assertTrue(math.isfinite(result.history[0].recon))
        self.assertTrue(math.isfinite(result.final_loss.total))

    def test_same_seed_same_weights(self):
        config = small_train_config(epochs=2)
        first = train(config, self.blocks)
        second = train(config, self.blocks)
        for name, p in first.params.named_params().items():
            npt.assert_array_equal(second.params.named_params()[name].data, p.data, err_msg=name)

    def test_symmetry_residual_is_reported(self):
        params = init_params(small_train_config().net)
        self.assertGreater(mean_symmetry_residual(params, self.blocks[:8]), 0.0)

    def test_rejects_bad_corpora(self):
        config = small_train_config()
        with self.assertRaises(DataError):
            train(config, self.blocks[:10])
        with self.assertRaises(DataError):
            train(config, np.empty((0, 16)))
        with self.assertRaises(DimensionError):
            train(config, synthetic_blocks(32, 5))

    def test_non_finite_batch(self):
        config = small_train_config()
        params = init_params(config.net)
        blocks = self.blocks[:16].copy()
        blocks[3, 7] = np.nan
        with self.assertRaises(NumericError):
            train_step(params, Adam(params.params(), lr=config.lr), blocks, config)


if __name__ == "__main__":
    unittest.main()
