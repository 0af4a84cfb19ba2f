#!/usr/bin/env python
# -*- coding: utf-8 -*

import os
import shutil
import tempfile
import unittest
import numpy as np
from PIL import features

import semwire
from semwire.core import ImageBuffer, SegMap, Caption, ClassTaxonomy, SemanticGroup
from semwire.container import PayloadContainer, Tags
from semwire.codec import downsample_segmap, upsample_segmap
from semwire.edges import canny, to_grayscale
from semwire.mmsd import MmsdOpts, MmsdPayload, mmsd_pack, mmsd_unpack, pack_modalities, export_modalities, \
                        reconstruct_external, compression_ratio, ratio_report, ratio_summary
from tests.synthetic import street_segmap, textured, TAXONOMY, ROAD, HEIGHT, WIDTH

TMP = tempfile.mkdtemp(prefix='semwire-mmsd-')

CAPTION = Caption('a city street with a parked car and a pedestrian near a pole')

# decimal tolerance
TOL = 9


def tearDownModule():
    shutil.rmtree(TMP, ignore_errors=True)


def write_bytes(name: str, n: int) -> str:
    path = os.path.join(TMP, name)
    with open(path, 'wb') as handle:
        handle.write(b'\x00' * n)
    return path


@unittest.skipUnless(features.check('webp'), 'Pillow built without WebP')
class KnownValues(unittest.TestCase):
    def test_flat_payload(self):
        img = ImageBuffer(np.full((64, 64, 3), 128, dtype=np.uint8))
        seg = SegMap(np.full((64, 64), ROAD), TAXONOMY)
        container = mmsd_pack(img, seg, Caption('x'))
        sizes = container.entry_sizes()
        self.assertLess(sizes[Tags.seg], 200)
        self.assertLess(sizes[Tags.edg], 200)
        self.assertEqual(sizes[Tags.cap], 1)

    def test_layout(self):
        container = mmsd_pack(textured(), street_segmap(), CAPTION)
        self.assertEqual(container.tags, ['SEG', 'EDG', 'CAP', 'MET'])
        data = container.to_bytes()
        self.assertEqual(container.total_bytes, len(data))
        self.assertEqual(container.total_bytes, container.overhead + sum(container.entry_sizes().values()))
        path = os.path.join(TMP, 'layout.smc')
        self.assertEqual(container.to_file(path), os.path.getsize(path))
        payload = MmsdPayload.from_container(PayloadContainer.from_bytes(data))
        self.assertEqual((payload.width, payload.height, payload.num_classes), (WIDTH, HEIGHT, 34))
        self.assertEqual(payload.canny, (100., 200.))

    def test_unpack(self):
        img, seg = textured(seed=1), street_segmap()
        container = mmsd_pack(img, seg, CAPTION)
        seg_out, edges, caption = mmsd_unpack(PayloadContainer.from_bytes(container.to_bytes()))
        # the label map is smaller than the target, so it travels at full resolution
        self.assertTrue(np.array_equal(seg_out.labels, seg.labels))
        self.assertEqual(edges, canny(to_grayscale(img)))
        self.assertEqual(caption, CAPTION)
        self.assertEqual(caption.encode(), CAPTION.encode())

    def test_downsampled(self):
        seg = street_segmap()
        opts = MmsdOpts(seg_w=WIDTH // 2, seg_h=HEIGHT // 2)
        small = mmsd_pack(textured(seed=2), seg, CAPTION, opts)
        full = mmsd_pack(textured(seed=2), seg, CAPTION)
        self.assertLess(small.entry_sizes()[Tags.seg], full.entry_sizes()[Tags.seg])
        seg_out, _, _ = mmsd_unpack(small)
        self.assertEqual((seg_out.width, seg_out.height), (WIDTH, HEIGHT))
        ref = upsample_segmap(downsample_segmap(seg, WIDTH // 2, HEIGHT // 2), WIDTH, HEIGHT)
        self.assertTrue(np.array_equal(seg_out.labels, ref.labels))

    def test_idempotent(self):
        opts = MmsdOpts(seg_w=100, seg_h=70)
        first = mmsd_pack(textured(seed=3), street_segmap(), CAPTION, opts)
        seg, edges, caption = mmsd_unpack(first)
        second = pack_modalities(seg, edges, caption, opts)
        self.assertEqual(second.to_bytes(), first.to_bytes())

    def test_ablations(self):
        img, seg = textured(seed=4), street_segmap()
        full = mmsd_pack(img, seg, CAPTION)
        for with_edges, with_caption in ((False, True), (True, False), (False, False)):
            with self.subTest(edges=with_edges, caption=with_caption):
                opts = MmsdOpts(with_edges=with_edges, with_caption=with_caption)
                container = mmsd_pack(img, seg, None if not with_caption else CAPTION, opts)
                self.assertEqual(Tags.edg in container.tags, with_edges)
                self.assertEqual(Tags.cap in container.tags, with_caption)
                self.assertLess(container.total_bytes, full.total_bytes)
                _, edges, caption = mmsd_unpack(container)
                self.assertEqual(edges is None, not with_edges)
                self.assertEqual(caption is None, not with_caption)

    def test_errors(self):
        img, seg = textured(), street_segmap()
        for caption in (None, Caption('')):
            with self.subTest(caption=caption):
                with self.assertRaises(semwire.ContainerError):
                    mmsd_pack(img, seg, caption)
        with self.assertRaises(semwire.ContainerError):
            pack_modalities(seg, None, CAPTION)
        with self.assertRaises(semwire.DimensionError):
            mmsd_pack(textured(64, 64), seg, CAPTION)
        with self.assertRaises(AssertionError):
            mmsd_pack(img, seg, CAPTION, MmsdOpts(seg_w=0))
        with self.assertRaises(AssertionError):
            mmsd_pack(img, seg, CAPTION, MmsdOpts(canny_low=210, canny_high=200))
        tiny = ClassTaxonomy(['void', 'car'], [SemanticGroup.BACKGROUND, SemanticGroup.VEHICLES])
        with self.assertRaises(semwire.ContainerError):
            mmsd_unpack(mmsd_pack(img, seg, CAPTION), tiny)
        samr_like = PayloadContainer.from_bytes(mmsd_pack(img, seg, CAPTION).to_bytes())
        entries = [e for e in samr_like.entries if e.tag != Tags.met]
        with self.assertRaises(semwire.ContainerError):
            mmsd_unpack(PayloadContainer(entries))

    def test_ratio(self):
        container = mmsd_pack(textured(seed=5), street_segmap(), CAPTION)
        same = write_bytes('same.png', container.total_bytes)
        self.assertEqual(compression_ratio(same, container), 1.)
        big = write_bytes('big.png', 111 * container.total_bytes)
        self.assertAlmostEqual(compression_ratio(big, container), 111., TOL)
        with self.assertRaises(semwire.IoError):
            compression_ratio(os.path.join(TMP, 'missing.png'), container)

    def test_ratio_report(self):
        containers = [mmsd_pack(textured(seed=s), street_segmap(), CAPTION) for s in (6, 7)]
        paths = [write_bytes('orig6.png', 50000), write_bytes('orig7.png', 150000)]
        report = ratio_report([(f'img{i}', p, c) for i, (p, c) in enumerate(zip(paths, containers))])
        self.assertEqual(list(report.columns[:4]), ['image', 'orig_bytes', 'payload_bytes', 'ratio'])
        for row, container in zip(report.itertuples(), containers):
            self.assertEqual(row.payload_bytes, container.total_bytes)
            self.assertAlmostEqual(row.ratio, row.orig_bytes / row.payload_bytes, TOL)
            self.assertEqual(row.seg_bytes + row.edg_bytes + row.cap_bytes + row.met_bytes + row.overhead_bytes, \
                             row.payload_bytes)
            self.assertEqual(row.cap_bytes, CAPTION.byte_len)
        summary = ratio_summary(report)
        self.assertEqual(summary['images'], 2)
        self.assertAlmostEqual(summary['mean_ratio'], report['ratio'].mean(), TOL)
        self.assertAlmostEqual(summary['ratio_of_means'], \
                               100000. / report['payload_bytes'].mean(), TOL)
        self.assertEqual(ratio_summary(report.iloc[:0]), {'images': 0})

    def test_export(self):
        container = mmsd_pack(textured(seed=8), street_segmap(), CAPTION)
        paths = export_modalities(container, os.path.join(TMP, 'export'))
        self.assertEqual(sorted(paths), ['caption', 'edge', 'seg'])
        with open(paths['caption'], 'rb') as handle:
            self.assertEqual(handle.read(), CAPTION.encode())
        labels = semwire.load_image(paths['seg']).pixels[:, :, 0]
        self.assertTrue(np.array_equal(labels, street_segmap().labels))
        edges = semwire.load_image(paths['edge'])
        self.assertEqual((edges.width, edges.height), (WIDTH, HEIGHT))

    @unittest.skipUnless(shutil.which('cp') and shutil.which('true'), 'coreutils unavailable')
    def test_external(self):
        container = mmsd_pack(textured(seed=9), street_segmap(), CAPTION)
        paths = export_modalities(container, os.path.join(TMP, 'external'))
        out = os.path.join(TMP, 'external', 'out.png')
        img = reconstruct_external(paths, 'cp {edge} {out}', out, WIDTH, HEIGHT)
        self.assertEqual((img.width, img.height), (WIDTH, HEIGHT))
        with self.assertRaises(semwire.ExternalError):
            reconstruct_external(paths, 'cp {edge} {out}', out, WIDTH // 2, HEIGHT)
        with self.assertRaises(semwire.ExternalError):
            reconstruct_external(paths, 'true {seg} {edge} {caption}', os.path.join(TMP, 'none.png'), WIDTH, HEIGHT)

if __name__ == '__main__':
    print('test: mmsd')
    unittest.main()
