#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
codec module
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import io
import enum
import numpy as np
from PIL import Image, features
from typing import Optional

from .core import ImageBuffer, SegMap, CodecError, DimensionError

# libjpeg 4:2:0 chroma subsampling
JPEG_SUBSAMPLING = 2
# webp encoder effort
WEBP_METHOD = 6


class Format(enum.Enum):
        JPEG = 'JPEG'
        WEBP_LOSSY = 'WebP-lossy'
        WEBP_LOSSLESS = 'WebP-lossless'

        @property
        def lossless(self) -> bool:
                return self is Format.WEBP_LOSSLESS


class EncodedBlob(object):
        """
        this class holds an encoded bitstream and the geometry it decodes to
        """
        __slots__ = ('format', 'quality', 'data', 'src_w', 'src_h', 'channels')

        def __init__(self, format: Format, quality: Optional[int], data: bytes, \
                     src_w: int, src_h: int, channels: int = 3) -> None:
                if len(data) == 0:
                    raise CodecError('empty bitstream')
                self.format = format
                self.quality = None if format.lossless else quality
                self.data = bytes(data)
                self.src_w = src_w
                self.src_h = src_h
                self.channels = channels

        @property
        def nbytes(self) -> int:
                return len(self.data)

        def __repr__(self) -> str:
                q = '' if self.quality is None else f', Q={self.quality}'
                return f'EncodedBlob({self.format.value}{q}, {self.nbytes} B, {self.src_w}x{self.src_h})'


def encode(img: ImageBuffer, format: Format, quality: Optional[int] = None) -> EncodedBlob:
        """
        this function encodes an image as JPEG or WebP; WebP-lossless round-trips exactly
        """
        if not format.lossless:
            if quality is None or not 1 <= int(quality) <= 100:
                raise CodecError(f'invalid quality {quality}. valid choices: 1 <= Q <= 100')
            quality = int(quality)
        if format is not Format.JPEG and not features.check('webp'):
            raise CodecError('Pillow was built without WebP support')
        buf = io.BytesIO()
        try:
            if format is Format.JPEG:
                img.to_pil().save(buf, format='JPEG', quality=quality, subsampling=JPEG_SUBSAMPLING, \
                                  optimize=False, progressive=False)
            elif format is Format.WEBP_LOSSY:
                img.to_pil().save(buf, format='WEBP', quality=quality, method=WEBP_METHOD)
            else:
                img.to_pil().save(buf, format='WEBP', lossless=True, quality=100, method=WEBP_METHOD, exact=True)
        except (OSError, ValueError, KeyError) as err:
            raise CodecError(f'{format.value} encoding failed: {err}') from err
        return EncodedBlob(format, quality, buf.getvalue(), img.width, img.height, img.channels)


def decode(blob: EncodedBlob) -> ImageBuffer:
        """
        this function decodes a bitstream and checks its geometry
        """
        try:
            with Image.open(io.BytesIO(blob.data)) as handle:
                handle.load()
                # webp stores gray content as rgb
                pixels = np.asarray(handle.convert('L' if blob.channels == 1 else 'RGB'))
        except (OSError, SyntaxError, ValueError) as err:
            raise CodecError(f'{blob.format.value} decoding failed: {err}') from err
        if pixels.shape[:2] != (blob.src_h, blob.src_w):
            raise CodecError(f'decoded {pixels.shape[1]}x{pixels.shape[0]}, expected {blob.src_w}x{blob.src_h}')
        return ImageBuffer(pixels)


def _nearest(src: int, dst: int) -> np.ndarray:
        """
        centre-aligned nearest-neighbor source indices for dst samples
        """
        return ((2 * np.arange(dst, dtype=np.int64) + 1) * src) // (2 * dst)


def _resample(seg: SegMap, target_w: int, target_h: int) -> SegMap:
        rows = _nearest(seg.height, target_h)
        cols = _nearest(seg.width, target_w)
        return SegMap(seg.labels[rows[:, None], cols[None, :]], seg.taxonomy)


def downsample_segmap(seg: SegMap, target_w: int, target_h: int) -> SegMap:
        """
        this function shrinks a label map by nearest-neighbor selection (labels are categorical)
        """
        if not (0 < target_w <= seg.width and 0 < target_h <= seg.height):
            raise DimensionError(f'cannot downsample {seg.width}x{seg.height} to {target_w}x{target_h}')
        return _resample(seg, target_w, target_h)


def upsample_segmap(seg: SegMap, target_w: int, target_h: int) -> SegMap:
        """
        this function enlarges a label map by nearest-neighbor selection
        """
        if target_w < seg.width or target_h < seg.height:
            raise DimensionError(f'cannot upsample {seg.width}x{seg.height} to {target_w}x{target_h}')
        return _resample(seg, target_w, target_h)


def labels_to_image(seg: SegMap) -> ImageBuffer:
        """
        this function stores class ids as 8-bit gray samples
        """
        if seg.taxonomy.num_classes > 256:
            raise CodecError(f'{seg.taxonomy.num_classes} classes do not fit 8-bit label images')
        return ImageBuffer(seg.labels.astype(np.uint8))
