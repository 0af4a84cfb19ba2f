#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
mmsd module

multi-modal semantic decomposition: the sender transmits a downsampled label map,
a canny edge map and a caption in one container, the receiver regenerates the scene
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import os
import logging
import numpy as np
import pandas as pd
from typing import Dict, Iterable, List, Optional, Tuple

from .core import ImageBuffer, SegMap, Caption, ClassTaxonomy, ContainerError, DimensionError, \
                  ExternalError, IoError, SemwireError, load_image, save_image
from .container import Entry, PayloadContainer, Tags, make_meta, parse_meta
from .codec import Format, EncodedBlob, encode, decode, downsample_segmap, upsample_segmap, labels_to_image
from .edges import EdgeMap, CANNY_LOW, CANNY_HIGH, canny, to_grayscale
from .tools import run_external

logger = logging.getLogger(__name__)

SEG_W = 1024
SEG_H = 512


class MmsdOpts(object):
        """
        this class contains all mmsd packing attributes
        """
        __slots__ = ('seg_w', 'seg_h', 'canny_low', 'canny_high', 'with_edges', 'with_caption', 'verbose')

        def __init__(self, seg_w: int = SEG_W, seg_h: int = SEG_H, canny_low: float = CANNY_LOW, \
                     canny_high: float = CANNY_HIGH, with_edges: bool = True, with_caption: bool = True, \
                     verbose: int = 0) -> None:
                """
                init packing attributes
                """
                self.seg_w = seg_w
                self.seg_h = seg_h
                self.canny_low = canny_low
                self.canny_high = canny_high
                # ablation switches
                self.with_edges = with_edges
                self.with_caption = with_caption
                self.verbose = verbose

        def target(self, width: int, height: int) -> Tuple[int, int]:
                """
                label map target clamped to the source dimensions
                """
                return min(self.seg_w, width), min(self.seg_h, height)


def sanity_check(opts: MmsdOpts) -> None:
        """
        this function performs sanity checks of mmsd attributes
        """
        assert isinstance(opts.seg_w, int) and isinstance(opts.seg_h, int) and opts.seg_w > 0 and opts.seg_h > 0, \
            'invalid label map target. valid choices: positive integer width and height'
        assert 0 <= opts.canny_low <= opts.canny_high <= 255, \
            'invalid canny thresholds. valid choices: 0 <= low <= high <= 255'
        assert isinstance(opts.with_edges, bool), \
            'invalid with_edges option. valid choices: True or False'
        assert isinstance(opts.with_caption, bool), \
            'invalid with_caption option. valid choices: True or False'
        assert isinstance(opts.verbose, int) and opts.verbose >= 0, \
            'invalid verbosity. valid choices: integers >= 0'


class MmsdPayload(object):
        """
        this class holds the transmitted (label map, edge map, caption) triple
        """
        __slots__ = ('seg_blob', 'edge_blob', 'caption', 'width', 'height', 'num_classes', 'canny')

        def __init__(self, seg_blob: EncodedBlob, edge_blob: Optional[EncodedBlob], caption: Optional[Caption], \
                     width: int, height: int, num_classes: int, canny: Tuple[float, float]) -> None:
                if edge_blob is not None and (edge_blob.src_w, edge_blob.src_h) != (width, height):
                    raise DimensionError(f'edge map of {edge_blob.src_w}x{edge_blob.src_h} does not ' \
                                         f'match {width}x{height}')
                if seg_blob.src_w > width or seg_blob.src_h > height:
                    raise DimensionError(f'label map of {seg_blob.src_w}x{seg_blob.src_h} exceeds {width}x{height}')
                self.seg_blob = seg_blob
                self.edge_blob = edge_blob
                self.caption = caption
                self.width = width
                self.height = height
                self.num_classes = num_classes
                self.canny = canny

        def to_container(self) -> PayloadContainer:
                meta = make_meta(kind='mmsd', width=self.width, height=self.height, \
                                 seg=[self.seg_blob.src_w, self.seg_blob.src_h], classes=self.num_classes, \
                                 canny=list(self.canny))
                entries = [Entry(Tags.seg, self.seg_blob.data)]
                if self.edge_blob is not None:
                    entries.append(Entry(Tags.edg, self.edge_blob.data))
                if self.caption is not None:
                    entries.append(Entry(Tags.cap, self.caption.encode()))
                entries.append(Entry(Tags.met, meta))
                return PayloadContainer(entries)

        @classmethod
        def from_container(cls, container: PayloadContainer) -> 'MmsdPayload':
                meta = parse_meta(container.require(Tags.met))
                if meta.get('kind') != 'mmsd':
                    raise ContainerError(f'not an MMSD container (kind: {meta.get("kind")!r})')
                try:
                    width, height = int(meta['width']), int(meta['height'])
                    seg_w, seg_h = (int(n) for n in meta['seg'])
                    num_classes = int(meta['classes'])
                    low, high = (float(t) for t in meta['canny'])
                except (KeyError, TypeError, ValueError) as err:
                    raise ContainerError(f'incomplete MMSD metadata: {err}') from err
                seg_blob = EncodedBlob(Format.WEBP_LOSSLESS, None, container.require(Tags.seg), seg_w, seg_h, 1)
                edg = container.get(Tags.edg)
                edge_blob = None if edg is None else EncodedBlob(Format.WEBP_LOSSLESS, None, edg, width, height, 1)
                cap = container.get(Tags.cap)
                caption = None if cap is None else Caption.decode(cap)
                return cls(seg_blob, edge_blob, caption, width, height, num_classes, (low, high))


def pack_modalities(seg: SegMap, edges: Optional[EdgeMap], caption: Optional[Caption], \
                    opts: Optional[MmsdOpts] = None) -> PayloadContainer:
        """
        this function packs full-resolution modalities into an MMSD container
        """
        opts = opts or MmsdOpts()
        sanity_check(opts)
        width, height = seg.width, seg.height
        if opts.with_edges:
            if edges is None:
                raise ContainerError('edge map required (with_edges=True)')
            if (edges.width, edges.height) != (width, height):
                raise DimensionError(f'edge map of {edges.width}x{edges.height} does not match ' \
                                     f'label map of {width}x{height}')
        if opts.with_caption and (caption is None or not caption.text):
            raise ContainerError('caption required (with_caption=True) and must be nonempty')
        seg_small = downsample_segmap(seg, *opts.target(width, height))
        seg_blob = encode(labels_to_image(seg_small), Format.WEBP_LOSSLESS)
        edge_blob = encode(edges.to_image(), Format.WEBP_LOSSLESS) if opts.with_edges else None
        payload = MmsdPayload(seg_blob, edge_blob, caption if opts.with_caption else None, \
                              width, height, seg.taxonomy.num_classes, (opts.canny_low, opts.canny_high))
        container = payload.to_container()
        logger.debug('mmsd pack: %s', ', '.join(f'{t} {n} B' for t, n in container.entry_sizes().items()))
        return container


def mmsd_pack(img: ImageBuffer, seg: SegMap, caption: Optional[Caption], \
              opts: Optional[MmsdOpts] = None) -> PayloadContainer:
        """
        this function builds the MMSD payload of an image: SEG (downsampled labels, WebP-lossless),
        EDG (canny edges, WebP-lossless), CAP (UTF-8 caption) and MET entries
        """
        opts = opts or MmsdOpts()
        if (seg.width, seg.height) != (img.width, img.height):
            raise DimensionError(f'label map of {seg.width}x{seg.height} does not match ' \
                                 f'image of {img.width}x{img.height}')
        edges = canny(to_grayscale(img), opts.canny_low, opts.canny_high) if opts.with_edges else None
        return pack_modalities(seg, edges, caption, opts)


def mmsd_unpack(container: PayloadContainer, taxonomy: Optional[ClassTaxonomy] = None) \
        -> Tuple[SegMap, Optional[EdgeMap], Optional[Caption]]:
        """
        this function recovers the label map (upsampled to the original size), the edge map
        and the caption; ablated modalities come back as None
        """
        taxonomy = taxonomy or ClassTaxonomy.default()
        payload = MmsdPayload.from_container(container)
        if payload.num_classes != taxonomy.num_classes:
            raise ContainerError(f'payload was packed with {payload.num_classes} classes, ' \
                                 f'taxonomy has {taxonomy.num_classes}')
        labels = decode(payload.seg_blob).pixels[:, :, 0].astype(np.int64)
        seg = upsample_segmap(SegMap(labels, taxonomy), payload.width, payload.height)
        edges = None
        if payload.edge_blob is not None:
            try:
                edges = EdgeMap(decode(payload.edge_blob).pixels[:, :, 0])
            except ValueError as err:
                raise ContainerError(f'EDG entry is not a binary edge map: {err}') from err
        return seg, edges, payload.caption


def export_modalities(container: PayloadContainer, out_dir: str, \
                      taxonomy: Optional[ClassTaxonomy] = None) -> Dict[str, str]:
        """
        this function writes the unpacked modalities as seg.png, edge.png and caption.txt
        """
        seg, edges, caption = mmsd_unpack(container, taxonomy)
        try:
            os.makedirs(out_dir, exist_ok=True)
        except OSError as err:
            raise IoError(f'cannot create {out_dir}: {err}') from err
        paths = {'seg': os.path.join(out_dir, 'seg.png')}
        save_image(labels_to_image(seg), paths['seg'])
        if edges is not None:
            paths['edge'] = os.path.join(out_dir, 'edge.png')
            save_image(edges.to_image(), paths['edge'])
        if caption is not None:
            paths['caption'] = os.path.join(out_dir, 'caption.txt')
            try:
                with open(paths['caption'], 'wb') as handle:
                    handle.write(caption.encode())
            except OSError as err:
                raise IoError(f'cannot write {paths["caption"]}: {err}') from err
        return paths


def reconstruct_external(paths: Dict[str, str], cmd: str, out: str, width: int, height: int, \
                         timeout: Optional[float] = None) -> ImageBuffer:
        """
        this function runs an external generative decoder on exported modalities and checks
        that it produced a width x height image
        """
        fields = {'seg': paths.get('seg', ''), 'edge': paths.get('edge', ''), \
                  'caption': paths.get('caption', ''), 'out': out}
        kwargs = {} if timeout is None else {'timeout': timeout}
        run_external(cmd, fields, **kwargs)
        try:
            img = load_image(out)
        except SemwireError as err:
            raise ExternalError(f'external decoder produced no readable image: {err}') from err
        if (img.width, img.height) != (width, height):
            raise ExternalError(f'external decoder returned {img.width}x{img.height}, expected {width}x{height}')
        return img


def compression_ratio(original_path: str, payload: PayloadContainer) -> float:
        """
        this function returns original file bytes over serialized payload bytes
        """
        return _file_size(original_path) / payload.total_bytes


def _file_size(path: str) -> int:
        try:
            return os.path.getsize(path)
        except OSError as err:
            raise IoError(f'cannot stat {path}: {err}') from err


def ratio_report(items: Iterable[Tuple[str, str, PayloadContainer]]) -> pd.DataFrame:
        """
        this function tabulates (image, orig_bytes, payload_bytes, ratio) plus body bytes per entry
        for (image id, original path, container) items
        """
        rows: List[Dict[str, object]] = []
        for image, path, container in items:
            sizes = container.entry_sizes()
            orig_bytes = _file_size(path)
            rows.append({'image': image, 'orig_bytes': orig_bytes, 'payload_bytes': container.total_bytes, \
                         'ratio': orig_bytes / container.total_bytes, \
                         'seg_bytes': sizes.get(Tags.seg, 0), 'edg_bytes': sizes.get(Tags.edg, 0), \
                         'cap_bytes': sizes.get(Tags.cap, 0), 'met_bytes': sizes.get(Tags.met, 0), \
                         'overhead_bytes': container.overhead})
        columns = ['image', 'orig_bytes', 'payload_bytes', 'ratio', 'seg_bytes', 'edg_bytes', \
                   'cap_bytes', 'met_bytes', 'overhead_bytes']
        return pd.DataFrame(rows, columns=columns)


def ratio_summary(report: pd.DataFrame) -> Dict[str, float]:
        """
        this function returns corpus statistics of a ratio report; the headline figure is the
        mean of per-image ratios, the ratio of mean sizes is reported next to it
        """
        if report.empty:
            return {'images': 0}
        return {'images': int(len(report)), \
                'mean_ratio': float(report['ratio'].mean()), \
                'std_ratio': float(report['ratio'].std(ddof=0)), \
                'ratio_of_means': float(report['orig_bytes'].mean() / report['payload_bytes'].mean()), \
                'reduction_pct': float(100. * (1. - report['payload_bytes'].sum() / report['orig_bytes'].sum())), \
                'caption_share_pct': float(100. * report['cap_bytes'].sum() / report['payload_bytes'].sum())}
