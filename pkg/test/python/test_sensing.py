import unittest

import numpy as np
import numpy.testing as npt

from amp_cs.errors import DimensionError, ParameterError
from amp_cs.sensing import (luminance, make_gaussian_phi, measure, measurement_count, partition_blocks,
                            reassemble)


class TestSensing(unittest.TestCase):
    def test_measurement_count(self):
        self.assertEqual(measurement_count(0.25, 1089), 272)
        self.assertEqual(measurement_count(0.01, 1089), 11)
        self.assertEqual(measurement_count(0.5, 1089), 545)
        self.assertEqual(measurement_count(1.0, 1089), 1089)
        self.assertEqual(measurement_count(0.001, 100), 1)
        for bad in (0.0, -0.1, 1.5):
            with self.assertRaises(ParameterError):
                measurement_count(bad, 1089)

    def test_gaussian_phi_is_seeded(self):
        a = make_gaussian_phi(0.25, 1089, seed=3)
        b = make_gaussian_phi(0.25, 1089, seed=3)
        c = make_gaussian_phi(0.25, 1089, seed=4)
        self.assertEqual(a.phi.shape, (272, 1089))
        npt.assert_array_equal(a.phi, b.phi)
        self.assertFalse(np.array_equal(a.phi, c.phi))

    def test_gaussian_phi_column_norms(self):
        phi = make_gaussian_phi(0.25, 1089, seed=0).phi
        squared = (phi ** 2).sum(axis=0)
        self.assertAlmostEqual(float(squared.mean()), 1.0, delta=0.02)

    def test_measure_is_linear(self):
        system = make_gaussian_phi(0.1, 64, seed=1)
        rng = np.random.default_rng(0)
        x1, x2 = rng.normal(size=64), rng.normal(size=64)
        npt.assert_allclose(measure(system, 2.0 * x1 - 3.0 * x2),
                            2.0 * measure(system, x1) - 3.0 * measure(system, x2), atol=1e-12)
        batch = measure(system, np.stack([x1, x2]))
        npt.assert_allclose(batch[1], measure(system, x2), atol=1e-12)
        with self.assertRaises(DimensionError):
            measure(system, np.ones(63))


class TestBlocks(unittest.TestCase):
    def test_round_trip(self):
        rng = np.random.default_rng(5)
        for height, width, block in [(1, 1, 33), (33, 33, 33), (34, 70, 33), (100, 7, 33), (17, 45, 8)]:
            with self.subTest(height=height, width=width, block=block):
                image = rng.uniform(0, 255, size=(height, width))
                blocks, grid = partition_blocks(image, block)
                self.assertEqual(blocks.shape, (grid.count, block * block))
                npt.assert_array_equal(reassemble(blocks, grid), image)

    def test_round_trip_every_square_size(self):
        rng = np.random.default_rng(6)
        for side in range(1, 101):
            image = rng.uniform(0, 255, size=(side, side))
            blocks, grid = partition_blocks(image, 33)
            npt.assert_array_equal(reassemble(blocks, grid), image, err_msg=str(side))

    def test_row_major_block_order(self):
        image = np.zeros((66, 66))
        image[:33, 33:] = 1.0
        blocks, grid = partition_blocks(image, 33)
        self.assertEqual(grid.count, 4)
        npt.assert_array_equal(blocks[1], np.ones(33 * 33))
        npt.assert_array_equal(blocks[0], np.zeros(33 * 33))
        npt.assert_array_equal(blocks[2], np.zeros(33 * 33))

    def test_edge_padding(self):
        image = np.arange(34 * 34, dtype=float).reshape(34, 34)
        blocks, grid = partition_blocks(image, 33)
        self.assertEqual(grid.count, 4)
        last = blocks[3].reshape(33, 33)
        self.assertTrue(np.all(last == image[33, 33]))
        right = blocks[1].reshape(33, 33)
        npt.assert_array_equal(right[:, 1], image[:33, 33])

    def test_reassemble_rejects_wrong_count(self):
        blocks, grid = partition_blocks(np.zeros((66, 66)), 33)
        with self.assertRaises(DimensionError):
            reassemble(blocks[:3], grid)

    def test_partition_rejects_empty_images(self):
        with self.assertRaises(ParameterError):
            partition_blocks(np.zeros((0, 5)), 33)
        with self.assertRaises(DimensionError):
            partition_blocks(np.zeros((3, 4, 5)), 33)

    def test_luminance(self):
        rgb = np.stack([np.full((2, 3), 100.0), np.full((2, 3), 50.0), np.full((2, 3), 200.0)])
        npt.assert_allclose(luminance(rgb), np.full((2, 3), 0.299 * 100 + 0.587 * 50 + 0.114 * 200))
        with self.assertRaises(DimensionError):
            luminance(np.zeros((2, 3)))


if __name__ == "__main__":
    unittest.main()
