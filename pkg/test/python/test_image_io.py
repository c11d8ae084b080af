import tempfile
import unittest
from pathlib import Path

import numpy as np
import numpy.testing as npt
import png

from amp_cs.errors import DataError
from amp_cs.image_io import list_images, read_image, read_pnm, write_image, write_pnm


class TestImageIO(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.rng = np.random.default_rng(0)

    def tearDown(self):
        self.tmp.cleanup()

    def test_pgm_is_bit_exact(self):
        image = self.rng.integers(0, 256, size=(13, 21)).astype(float)
        path = self.dir / "grey.pgm"
        write_pnm(path, image)
        npt.assert_array_equal(read_image(path), image)
        self.assertTrue(path.read_bytes().startswith(b"P5\n21 13\n255\n"))

    def test_ppm_is_channel_first(self):
        image = self.rng.integers(0, 256, size=(3, 5, 4)).astype(float)
        path = write_image(self.dir / "colour", image)
        self.assertEqual(path.suffix, ".ppm")
        npt.assert_array_equal(read_image(path), image)

    def test_header_comments_are_skipped(self):
        path = self.dir / "commented.pgm"
        path.write_bytes(b"P5\n# made by hand\n2 1\n# max\n255\n" + bytes([7, 250]))
        npt.assert_array_equal(read_pnm(path), [[7.0, 250.0]])

    def test_truncated_raster(self):
        path = self.dir / "short.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(10))
        with self.assertRaises(DataError):
            read_pnm(path)

    def test_unsupported_formats(self):
        path = self.dir / "ascii.pgm"
        path.write_bytes(b"P2\n1 1\n255\n7\n")
        with self.assertRaises(DataError):
            read_pnm(path)
        with self.assertRaises(DataError):
            read_image(self.dir / "missing.pgm")

    def test_png_grey_and_rgb(self):
        grey = self.rng.integers(0, 256, size=(6, 9))
        with open(self.dir / "grey.png", "wb") as f:
            png.Writer(9, 6, greyscale=True, bitdepth=8).write(f, grey.tolist())
        npt.assert_array_equal(read_image(self.dir / "grey.png"), grey)

        rgb = self.rng.integers(0, 256, size=(4, 5, 3))
        with open(self.dir / "rgb.png", "wb") as f:
            png.Writer(5, 4, greyscale=False, bitdepth=8).write(f, rgb.reshape(4, 15).tolist())
        npt.assert_array_equal(read_image(self.dir / "rgb.png"), rgb.transpose(2, 0, 1))

    def test_list_images_is_sorted(self):
        for name in ("b.pgm", "a.png", "notes.txt", "c.ppm"):
            (self.dir / name).write_bytes(b"")
        self.assertEqual([p.name for p in list_images(self.dir)], ["a.png", "b.pgm", "c.ppm"])
        with self.assertRaises(DataError):
            list_images(self.dir / "absent")


if __name__ == "__main__":
    unittest.main()
