#!/usr/bin/env python
# -*- coding: utf-8 -*

import shutil
import unittest
import numpy as np
from PIL import features

import semwire
from semwire.core import ImageBuffer, SegMap, ConvergenceWarning
from semwire.container import PayloadContainer, Tags
from semwire.codec import Format, encode, decode
from semwire.masking import PatchGrid, PatchMask, MaskConfig, semantic_mask, random_mask, pixel_mask
from semwire.metrics import psnr
from semwire.samr import SamrBitstream, Reconstructor, samr_encode, samr_decode, detect_mask, mask_f1, \
                        patch_means, recover_mask, harmonic_fill, inpaint_harmonic, masked_l1
from tests.synthetic import street_segmap, street_labels, textured, HEIGHT, WIDTH, TAXONOMY

# decimal tolerance
TOL = 9


def dense_harmonic(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """
    reference solve of the masked laplace system with a dense matrix
    """
    h, w = mask.shape
    idx = -np.ones((h, w), dtype=np.int64)
    ys, xs = np.nonzero(mask)
    idx[ys, xs] = np.arange(ys.size)
    a = np.zeros((ys.size, ys.size))
    b = np.zeros((ys.size, values.shape[2]))
    for k, (y, x) in enumerate(zip(ys, xs)):
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if not (0 <= ny < h and 0 <= nx < w):
                continue
            a[k, k] += 1.
            if mask[ny, nx]:
                a[k, idx[ny, nx]] -= 1.
            else:
                b[k] += values[ny, nx]
    out = values.copy()
    out[ys, xs] = np.linalg.solve(a, b)
    return out


def corpus_frames(n: int = 5) -> list:
    """
    the frames of tests.synthetic.write_corpus, in memory
    """
    labels = street_labels()
    return [(textured(seed=100 + i), SegMap(np.roll(labels, 8 * i, axis=1), TAXONOMY)) for i in range(n)]


class KnownValues(unittest.TestCase):
    def test_constant(self):
        img = ImageBuffer(np.full((32, 40, 3), 100, dtype=np.uint8))
        mask = random_mask(PatchGrid(32, 40), .5, seed=1)
        self.assertEqual(inpaint_harmonic(img, mask), img)

    def test_ramp(self):
        x = np.arange(64, dtype=np.float64)
        values = np.broadcast_to(2. * x + 10., (32, 64))[:, :, None].copy()
        mask = np.zeros((32, 64), dtype=bool)
        mask[:, 16:48] = True
        holes = values.copy()
        holes[mask] = 0.
        direct = harmonic_fill(holes, mask, solver='direct')
        self.assertTrue(np.allclose(direct, values, atol=1e-9))
        iterative = harmonic_fill(holes, mask, tol=1e-4)
        self.assertLess(np.max(np.abs(iterative - values)), .1)
        bits = np.zeros((4, 8), dtype=np.uint8)
        bits[:, 2:6] = 1
        filled = inpaint_harmonic(ImageBuffer(np.rint(holes).astype(np.uint8)), PatchMask(bits), tol=1e-4)
        self.assertTrue(np.array_equal(filled.pixels[:, :, 0], values[:, :, 0].astype(np.uint8)))

    def test_dense_oracle(self):
        rng = np.random.default_rng(42)
        values = rng.uniform(0., 255., size=(24, 24, 3))
        mask = np.zeros((24, 24), dtype=bool)
        mask[8:16, 8:16] = True
        # a second hole touching the image border
        mask[16:24, 0:8] = True
        ref = dense_harmonic(values, mask)
        self.assertTrue(np.allclose(harmonic_fill(values, mask, solver='direct'), ref, atol=1e-8))
        self.assertLess(np.max(np.abs(harmonic_fill(values, mask, tol=1e-2) - ref)), .5)
        self.assertLess(np.max(np.abs(harmonic_fill(values, mask, tol=1e-6) - ref)), 1e-3)
        unmasked = ~mask
        self.assertTrue(np.array_equal(harmonic_fill(values, mask)[unmasked], values[unmasked]))

    def test_single_patch(self):
        # one 8x8 hole between a black left column and a white right column
        values = np.zeros((8, 10, 1))
        values[:, 9] = 255.
        mask = np.zeros((8, 10), dtype=bool)
        mask[:, 1:9] = True
        ref = dense_harmonic(values, mask)
        self.assertTrue(np.allclose(ref[:, :, 0], 255. * np.arange(10) / 9.))
        self.assertLess(np.max(np.abs(harmonic_fill(values, mask) - ref)), .5)

    def test_maximum_principle(self):
        img = textured(64, 64, seed=8)
        mask = random_mask(PatchGrid(64, 64), .6, seed=8)
        pm = pixel_mask(mask, 64, 64)
        out = inpaint_harmonic(img, mask)
        for c in range(3):
            known = img.pixels[:, :, c][~pm]
            filled = out.pixels[:, :, c][pm]
            self.assertGreaterEqual(filled.min(), known.min())
            self.assertLessEqual(filled.max(), known.max())
        # unmasked pixels pass through
        self.assertTrue(np.array_equal(out.pixels[~pm], img.pixels[~pm]))

    def test_convergence_warning(self):
        values = np.random.default_rng(0).uniform(0., 255., size=(32, 32, 1))
        mask = np.zeros((32, 32), dtype=bool)
        mask[8:24, 8:24] = True
        with self.assertWarns(ConvergenceWarning):
            harmonic_fill(values, mask, tol=1e-12, max_iter=2)
        with self.assertRaises(AssertionError):
            harmonic_fill(values, mask, solver='multigrid')
        with self.assertRaises(semwire.DimensionError):
            harmonic_fill(values, mask[:16])

    def test_patch_means(self):
        img = ImageBuffer(np.arange(10 * 12, dtype=np.uint8).reshape(10, 12))
        means = patch_means(img, PatchGrid(10, 12))
        self.assertEqual(means.shape, (2, 2))
        self.assertAlmostEqual(means[1, 1], img.pixels[8:, 8:].mean(), TOL)
        self.assertAlmostEqual(means[0, 0], img.pixels[:8, :8].mean(), TOL)

    @unittest.skipUnless(features.check('webp'), 'Pillow built without WebP')
    def test_detect_lossless(self):
        img, seg = textured(), street_segmap()
        bs = samr_encode(img, seg, MaskConfig.preset(4), None, seed=3, format=Format.WEBP_LOSSLESS)
        grid = PatchGrid.for_image(img)
        true = semantic_mask(seg, MaskConfig.preset(4), grid, 3)
        self.assertGreater(true.count, 0)
        self.assertEqual(detect_mask(decode(bs.blob), grid), true)

    def test_detect_jpeg(self):
        img, seg = textured(seed=1), street_segmap()
        config = MaskConfig.preset(7)
        bs = samr_encode(img, seg, config, 50, seed=11)
        grid = PatchGrid.for_image(img)
        true = semantic_mask(seg, config, grid, 11)
        self.assertGreaterEqual(mask_f1(detect_mask(decode(bs.blob), grid), true), .98)

    def test_dark_content(self):
        pixels = textured(64, 64, seed=2).pixels.copy()
        pixels[8:16, 8:16] = 5
        img = ImageBuffer(pixels)
        seg = street_segmap(64, 64)
        grid = PatchGrid(64, 64)
        bs = samr_encode(img, seg, MaskConfig.uniform(0.), 90, seed=0)
        detected = detect_mask(decode(bs.blob), grid)
        # genuinely dark patches are false positives of threshold detection
        self.assertEqual(detected.count, 1)
        self.assertEqual(detected.bits[1, 1], 1)
        self.assertEqual(mask_f1(detected, PatchMask(np.zeros((8, 8)))), 0.)
        self.assertEqual(mask_f1(PatchMask(np.zeros((8, 8))), PatchMask(np.zeros((8, 8)))), 1.)
        # the side channel avoids them
        side = samr_encode(img, seg, MaskConfig.uniform(0.), 90, seed=0, with_mask_side_channel=True)
        self.assertEqual(samr_decode(side), decode(side.blob))
        self.assertNotEqual(samr_decode(bs), decode(bs.blob))

    def test_deterministic(self):
        img, seg = textured(seed=4), street_segmap()
        a = samr_encode(img, seg, MaskConfig.preset(2), 60, seed=9)
        b = samr_encode(img, seg, MaskConfig.preset(2), 60, seed=9)
        self.assertEqual(a.blob.data, b.blob.data)
        self.assertEqual(samr_decode(a), samr_decode(b))
        self.assertNotEqual(a.blob.data, samr_encode(img, seg, MaskConfig.preset(2), 60, seed=10).blob.data)

    def test_unmasked_is_jpeg(self):
        img, seg = textured(seed=5), street_segmap()
        bs = samr_encode(img, seg, MaskConfig.uniform(0.), 75, seed=1)
        self.assertEqual(bs.blob.data, encode(img, Format.JPEG, 75).data)
        self.assertEqual(samr_decode(bs), decode(bs.blob))

    def test_vehicles_kept(self):
        img, seg = textured(seed=6), street_segmap()
        bs = samr_encode(img, seg, MaskConfig.preset(0), 90, seed=5, with_mask_side_channel=True)
        # car region of the street layout, on whole patches
        car = (slice(HEIGHT // 2 + 16, HEIGHT // 2 + 56), slice(32, 112))
        self.assertEqual(pixel_mask(bs.side_mask, HEIGHT, WIDTH)[car].sum(), 0)
        self.assertGreater(decode(bs.blob).pixels[car].mean(), 40.)

    def test_compression_gain(self):
        seg = street_segmap()
        for seed in range(3):
            with self.subTest(seed=seed):
                img = textured(seed=100 + seed)
                plain = encode(img, Format.JPEG, 75)
                bs = samr_encode(img, seg, MaskConfig.preset(4), 75, seed=seed)
                self.assertLess(bs.blob.nbytes, plain.nbytes)
                self.assertEqual(bs.nbytes, len(bs.to_container().to_bytes()))

    def test_compression_gain_corpus(self):
        for i, (img, seg) in enumerate(corpus_frames()):
            for q in (5, 10, 50):
                plain = encode(img, Format.JPEG, q).nbytes
                for config in (0, 2, 4, 7):
                    with self.subTest(frame=i, Q=q, config=config):
                        bs = samr_encode(img, seg, MaskConfig.preset(config), q, seed=i)
                        self.assertLessEqual(bs.blob.nbytes, plain)

    def test_inpainting_gain(self):
        img, seg = textured(seed=7), street_segmap()
        bs = samr_encode(img, seg, MaskConfig.preset(4), 85, seed=2)
        zero_filled = decode(bs.blob)
        self.assertGreater(psnr(img, samr_decode(bs)), psnr(img, zero_filled) + 3.)

    def test_inpainting_gain_corpus(self):
        gains = []
        for i, (img, seg) in enumerate(corpus_frames()):
            bs = samr_encode(img, seg, MaskConfig.preset(0), 10, seed=i)
            gains.append(psnr(img, samr_decode(bs)) > psnr(img, decode(bs.blob)))
        self.assertGreaterEqual(np.mean(gains), .95)

    def test_masked_l1(self):
        target = ImageBuffer(np.zeros((16, 16, 3), dtype=np.uint8))
        mask = PatchMask(np.array([[1, 0], [0, 0]]))
        pred = ImageBuffer(np.full((16, 16, 3), 10, dtype=np.uint8))
        self.assertAlmostEqual(masked_l1(pred, target, mask), 10., TOL)
        pixels = np.zeros((16, 16, 3), dtype=np.uint8)
        pixels[:8, :8] = 20
        self.assertAlmostEqual(masked_l1(ImageBuffer(pixels), target, mask), .7 * 20., TOL)
        empty = PatchMask(np.zeros((2, 2)))
        self.assertAlmostEqual(masked_l1(pred, target, empty), .3 * 10., TOL)
        # brute force
        a, b = textured(16, 24, seed=1), textured(16, 24, seed=2)
        mask = PatchMask(np.array([[1, 0, 1], [0, 0, 1]]))
        pm = pixel_mask(mask, 16, 24)
        masked, other = [], []
        for y in range(16):
            for x in range(24):
                for c in range(3):
                    d = abs(int(a.pixels[y, x, c]) - int(b.pixels[y, x, c]))
                    (masked if pm[y, x] else other).append(d)
        ref = .7 * sum(masked) / len(masked) + .3 * sum(other) / len(other)
        self.assertAlmostEqual(masked_l1(a, b, mask), ref, TOL)
        with self.assertRaises(semwire.DimensionError):
            masked_l1(a, textured(16, 16), mask)

    def test_container(self):
        img, seg = textured(seed=3), street_segmap()
        for side in (False, True):
            with self.subTest(side_channel=side):
                bs = samr_encode(img, seg, MaskConfig.preset(4), 70, seed=4, with_mask_side_channel=side)
                container = PayloadContainer.from_bytes(bs.to_container().to_bytes())
                self.assertEqual(Tags.msk in container.tags, side)
                back = SamrBitstream.from_container(container)
                self.assertEqual((back.config_id, back.quality, back.seed), (4, 70, 4))
                self.assertEqual(back.blob.data, bs.blob.data)
                self.assertEqual(samr_decode(back), samr_decode(bs))
        with self.assertRaises(semwire.RleError):
            SamrBitstream(bs.blob, 4, 4, bs.n_h, bs.n_w + 1, bs.mask_rle)
        with self.assertRaises(semwire.ContainerError):
            SamrBitstream.from_container(PayloadContainer(container.entries[:1]))

    def test_recover_mask(self):
        img, seg = textured(seed=3), street_segmap()
        bs = samr_encode(img, seg, MaskConfig.preset(4), 70, seed=4, with_mask_side_channel=True)
        decoded = decode(bs.blob)
        self.assertEqual(recover_mask(bs, decoded), semantic_mask(seg, MaskConfig.preset(4), PatchGrid.for_image(img), 4))
        with self.assertRaises(semwire.DimensionError):
            recover_mask(bs, textured(64, 64))
        with self.assertRaises(semwire.DimensionError):
            samr_encode(img, street_segmap(64, 64), MaskConfig.preset(4), 70, seed=4)

    def test_reconstructor_parse(self):
        self.assertEqual(Reconstructor.parse('harmonic').kind, 'harmonic')
        rec = Reconstructor.parse('ext:inpaint --in {input} --mask {mask} --out {out}')
        self.assertEqual((rec.kind, rec.cmd), ('external', 'inpaint --in {input} --mask {mask} --out {out}'))
        for spec in ('ext:', 'lama', ''):
            with self.subTest(spec=spec):
                with self.assertRaises(ValueError):
                    Reconstructor.parse(spec)

    @unittest.skipUnless(shutil.which('cp') and shutil.which('false'), 'coreutils unavailable')
    def test_external(self):
        img, seg = textured(64, 64, seed=3), street_segmap(64, 64)
        bs = samr_encode(img, seg, MaskConfig.preset(7), 80, seed=1, with_mask_side_channel=True)
        decoded = decode(bs.blob)
        # copying the masked input back is a valid (if poor) reconstruction
        self.assertEqual(samr_decode(bs, Reconstructor.parse('ext:cp {input} {out}')), decoded)
        with self.assertRaises(semwire.ExternalError):
            samr_decode(bs, Reconstructor.parse('ext:false {input}'))
        with self.assertRaises(semwire.ExternalError):
            samr_decode(bs, Reconstructor.parse('ext:cp {mask} {nowhere}'))

if __name__ == '__main__':
    print('test: samr')
    unittest.main()
