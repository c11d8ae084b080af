import math
import unittest

import numpy as np
import numpy.testing as npt

from amp_cs.benchmark import (ABLATION_HEADER, ABLATION_VARIANTS, SWEEP_PARAMS, evaluate_images, run_ablation,
                              run_evaluation, run_sweep, with_net)
from amp_cs.data import synthetic_blocks
from amp_cs.errors import DimensionError, ParameterError
from amp_cs.models import ModelKind, NetConfig, TrainConfig
from amp_cs.nets import init_params, linear_baseline
from amp_cs.reconstruction import AmpReconstructor, NetReconstructor, reconstruct_image
from amp_cs.training import train
from amp_cs.utils.report import EvalReport


def tiny_train_config(**changes):
    net = NetConfig(ratio=0.25, block_size=4, channels=2, stages=1, seed=2)
    settings = dict(net=net, lr=2e-3, batch_size=8, epochs=1, seed=2)
    settings.update(changes)
    return TrainConfig(**settings)


class TestReconstructImage(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(6)

    def test_full_sampling_amp_is_lossless(self):
        grey = self.rng.integers(0, 256, size=(10, 7)).astype(float)
        result = reconstruct_image(grey, AmpReconstructor(1.0, block_size=4, seed=1))
        npt.assert_array_equal(result.image, grey)
        self.assertEqual(result.fallback_blocks, 0)

        colour = self.rng.integers(0, 256, size=(3, 5, 9)).astype(float)
        npt.assert_array_equal(reconstruct_image(colour, AmpReconstructor(1.0, block_size=4)).image, colour)

    def test_linear_network_at_full_sampling(self):
        params = linear_baseline(init_params(NetConfig(ratio=1.0, block_size=4, channels=2, stages=1)))
        grey = self.rng.integers(0, 256, size=(8, 8)).astype(float)
        npt.assert_array_equal(reconstruct_image(grey, NetReconstructor(params)).image, grey)

    def test_output_is_eight_bit(self):
        grey = self.rng.integers(0, 256, size=(9, 9)).astype(float)
        out = reconstruct_image(grey, AmpReconstructor(0.25, block_size=3)).image
        self.assertEqual(out.shape, grey.shape)
        npt.assert_array_equal(out, np.round(out))
        self.assertTrue(np.all((out >= 0) & (out <= 255)))

    def test_fixed_phi_must_match(self):
        params = init_params(NetConfig(ratio=0.25, block_size=4, channels=2, stages=1))
        with self.assertRaises(DimensionError):
            NetReconstructor(params, phi=np.ones((3, 16)))
        phi = np.ones((4, 16))
        NetReconstructor(params, phi=phi)
        self.assertFalse(np.array_equal(params.w_phi.data, phi))

    def test_rejects_bad_images(self):
        with self.assertRaises(DimensionError):
            reconstruct_image(np.zeros((2, 4, 4)), AmpReconstructor(1.0, block_size=4))


class TestBenchmarks(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(8)
        self.images = [("a", rng.integers(0, 256, size=(8, 8)).astype(float)),
                       ("b", rng.integers(0, 256, size=(4, 12)).astype(float))]
        self.blocks = synthetic_blocks(16, 4, seed=3)

    def test_evaluation_collects_rows_and_errors(self):
        def make(ratio):
            if ratio > 0.9:
                return AmpReconstructor(ratio, block_size=4)
            raise ParameterError(f"no model for ratio {ratio}")

        report = run_evaluation("amp", [0.5, 1.0], self.images, make, timing=False)
        self.assertEqual(len(report.rows), 2)
        self.assertTrue(all(math.isinf(row.psnr_db) and row.seconds == 0.0 for row in report.rows))
        self.assertEqual(len(report.errors), 1)
        self.assertEqual(report.errors[0].error_type, "INVALID_PARAMETER")

    def test_variant_grid(self):
        names = [v.name for v in ABLATION_VARIANTS]
        self.assertEqual(names, sorted(names))
        self.assertEqual(len(names), 8)
        self.assertEqual(ABLATION_HEADER[-2:], ["ratio", "psnr_db"])

        by_name = {v.name: v for v in ABLATION_VARIANTS}
        base = tiny_train_config()
        only_channel = with_net(base, **by_name["ampa-net-ac"].net_changes()).net
        self.assertEqual(only_channel.kind, ModelKind.AMPA_NET)
        self.assertEqual((only_channel.init_attention, only_channel.spatial_attention,
                          only_channel.channel_attention), (False, False, True))
        cnn_only = with_net(base, **by_name["cnn-only"].net_changes()).net
        self.assertFalse(cnn_only.amp_recurrence)
        self.assertTrue(cnn_only.pinv_init)
        self.assertEqual(by_name["amp-net-fixed-phi"].net_changes()["learn_phi"], False)

    def test_ablation_rows(self):
        by_name = {v.name: v for v in ABLATION_VARIANTS}
        variants = [by_name["amp"], by_name["cnn-only"]]
        rows, errors = run_ablation(tiny_train_config(), self.blocks, self.images, variants=variants)
        self.assertEqual(errors, [])
        self.assertEqual([r.variant.name for r in rows], ["amp", "cnn-only"])
        self.assertEqual(rows[0].as_csv()[:7], ["amp", 1, 0, 0, 0, 0, 0])
        self.assertTrue(all(math.isfinite(r.psnr_db) for r in rows))

    def test_attention_free_ampa_matches_plain_ampnet(self):
        base = tiny_train_config()
        by_name = {v.name: v for v in ABLATION_VARIANTS}
        rows, errors = run_ablation(base, self.blocks, self.images, variants=[by_name["amp-net"]])
        self.assertEqual(errors, [])

        gated_off = train(with_net(base, kind=ModelKind.AMPA_NET, init_attention=False,
                                   spatial_attention=False, channel_attention=False), self.blocks).params
        plain = train(with_net(base, kind=ModelKind.AMP_NET), self.blocks).params
        for name, p in plain.named_params().items():
            npt.assert_array_equal(gated_off.named_params()[name].data, p.data, err_msg=name)

        report = EvalReport("ampa-net")
        evaluate_images(report, NetReconstructor(gated_off), self.images, base.net.ratio, timing=False)
        self.assertEqual(report.mean_psnr(), rows[0].psnr_db)

    def test_sweep(self):
        rows, errors = run_sweep(tiny_train_config(), "loss", ["mse"], self.blocks, self.images)
        self.assertEqual(errors, [])
        self.assertEqual(rows[0][:2], ["loss", "mse"])
        with self.assertRaises(ParameterError):
            run_sweep(tiny_train_config(), "loss", ["huber"], self.blocks, self.images)
        with self.assertRaises(ParameterError):
            run_sweep(tiny_train_config(), "width", ["3"], self.blocks, self.images)

    def test_activation_sweep(self):
        self.assertIn("activation", SWEEP_PARAMS)
        rows, errors = run_sweep(tiny_train_config(), "activation", ["relu", "sigmoid"], self.blocks, self.images)
        self.assertEqual(errors, [])
        self.assertEqual([row[:2] for row in rows], [["activation", "relu"], ["activation", "sigmoid"]])
        self.assertTrue(all(math.isfinite(row[2]) for row in rows))
        with self.assertRaises(ParameterError):
            run_sweep(tiny_train_config(), "activation", ["tanh"], self.blocks, self.images)


if __name__ == "__main__":
    unittest.main()
