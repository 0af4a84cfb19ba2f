#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
core module
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import os
import enum
import numpy as np
from PIL import Image, UnidentifiedImageError
from typing import Dict, List, Tuple, Union, Optional

# bundled class taxonomy
TAXONOMY_FILE = os.path.join(os.path.dirname(__file__), 'data', 'cityscapes_taxonomy.txt')
# accepted raster input formats
IMAGE_FORMATS = ('PNG', 'JPEG')
# caption sidecar suffix
CAPTION_SUFFIX = '.caption.txt'


class SemwireError(Exception):
        """
        base class of all semwire errors
        """

class IoError(SemwireError, OSError):
        """
        missing or unreadable file
        """

class FormatError(SemwireError):
        """
        undecodable or unsupported file content
        """

class LabelError(SemwireError):
        """
        label map value outside the class taxonomy
        """

class ContainerError(SemwireError):
        """
        malformed SMC1 container
        """

class DimensionError(SemwireError, ValueError):
        """
        incompatible image, label map or grid dimensions
        """

class RleError(SemwireError):
        """
        malformed run-length encoded patch mask
        """

class CodecError(SemwireError):
        """
        failing JPEG/WebP encode or decode
        """

class ExternalError(SemwireError):
        """
        failing external reconstruction or caption command
        """

class CsvError(SemwireError):
        """
        malformed rate-distortion CSV
        """

class CorpusError(SemwireError):
        """
        unusable corpus directory
        """

class ConfigError(SemwireError):
        """
        malformed taxonomy or masking preset file
        """

class ConvergenceWarning(UserWarning):
        """
        iterative solver stopped at its iteration limit
        """


class SemanticGroup(enum.Enum):
        """
        coarse semantic groups sharing one masking probability
        """
        VEHICLES = 'Vehicles'
        HUMANS = 'Humans'
        FLAT_SURFACES = 'FlatSurfaces'
        CONSTRUCTION = 'Construction'
        OBJECTS = 'Objects'
        NATURE = 'Nature'
        SKY = 'Sky'
        BACKGROUND = 'Background'

        @property
        def index(self) -> int:
                return GROUPS.index(self)

        @classmethod
        def parse(cls, name: str) -> 'SemanticGroup':
                """
                look up a group by its name, ignoring case, blanks and underscores
                """
                key = name.strip().replace(' ', '').replace('_', '').lower()
                for group in cls:
                    if group.value.lower() == key:
                        return group
                raise ConfigError(f'unknown semantic group: {name!r}. valid choices: ' \
                                  f'{", ".join(g.value for g in cls)}')

GROUPS: Tuple[SemanticGroup, ...] = tuple(SemanticGroup)


class ClassTaxonomy(object):
        """
        this class maps class ids in [0, C) to names and semantic groups
        """
        __slots__ = ('names', 'group_of', 'group_lut')

        def __init__(self, names: List[str], group_of: List[SemanticGroup]) -> None:
                """
                init taxonomy attributes
                """
                if len(names) != len(group_of):
                    raise ConfigError('taxonomy needs one group per class name')
                if len(names) == 0:
                    raise ConfigError('taxonomy must hold at least one class')
                self.names = tuple(names)
                self.group_of = tuple(group_of)
                # group index per class id, used for vectorized lookups
                self.group_lut = np.array([g.index for g in self.group_of], dtype=np.int64)
                self.group_lut.setflags(write=False)

        @property
        def num_classes(self) -> int:
                return len(self.names)

        def group(self, class_id: int) -> SemanticGroup:
                return self.group_of[class_id]

        @classmethod
        def from_file(cls, path: str) -> 'ClassTaxonomy':
                """
                parse `id,name,group` lines; ids must cover [0, C) exactly once
                """
                try:
                    with open(path, 'r', encoding='utf-8') as handle:
                        lines = handle.read().splitlines()
                except OSError as err:
                    raise IoError(f'cannot read taxonomy file {path}: {err}') from err
                entries: Dict[int, Tuple[str, SemanticGroup]] = {}
                for n, line in enumerate(lines, start=1):
                    line = line.split('#', 1)[0].strip()
                    if not line:
                        continue
                    fields = [f.strip() for f in line.split(',')]
                    if len(fields) != 3:
                        raise ConfigError(f'{path}:{n}: expected `id,name,group`')
                    try:
                        class_id = int(fields[0])
                    except ValueError as err:
                        raise ConfigError(f'{path}:{n}: invalid class id {fields[0]!r}') from err
                    if class_id in entries:
                        raise ConfigError(f'{path}:{n}: duplicate class id {class_id}')
                    entries[class_id] = (fields[1], SemanticGroup.parse(fields[2]))
                if sorted(entries) != list(range(len(entries))):
                    raise ConfigError(f'{path}: class ids must cover 0..C-1 without gaps')
                return cls([entries[i][0] for i in range(len(entries))], \
                           [entries[i][1] for i in range(len(entries))])

        @classmethod
        def default(cls) -> 'ClassTaxonomy':
                """
                bundled Cityscapes labelIds taxonomy (34 classes)
                """
                return cls.from_file(TAXONOMY_FILE)


class ImageBuffer(object):
        """
        this class holds immutable 8-bit pixels in row-major (height, width, channels) layout
        """
        __slots__ = ('pixels',)

        def __init__(self, pixels: np.ndarray) -> None:
                """
                init image from a (h, w) or (h, w, c) uint8 array
                """
                pixels = np.asarray(pixels)
                if pixels.dtype != np.uint8:
                    raise FormatError(f'8-bit samples expected, got {pixels.dtype}')
                if pixels.ndim == 2:
                    pixels = pixels[:, :, None]
                if pixels.ndim != 3 or pixels.shape[2] not in (1, 3):
                    raise DimensionError(f'expected (h, w, 1) or (h, w, 3) pixels, got {pixels.shape}')
                if pixels.shape[0] == 0 or pixels.shape[1] == 0:
                    raise DimensionError('empty image')
                self.pixels = np.array(pixels, dtype=np.uint8, order='C', copy=True)
                self.pixels.setflags(write=False)

        @property
        def height(self) -> int:
                return self.pixels.shape[0]

        @property
        def width(self) -> int:
                return self.pixels.shape[1]

        @property
        def channels(self) -> int:
                return self.pixels.shape[2]

        @property
        def data(self) -> bytes:
                return self.pixels.tobytes()

        def pixel(self, x: int, y: int, ch: int = 0) -> int:
                return int(self.pixels[y, x, ch])

        @classmethod
        def from_bytes(cls, data: bytes, width: int, height: int, channels: int) -> 'ImageBuffer':
                """
                build an image from row-major samples; data[(y * w + x) * c + ch] is pixel (x, y, ch)
                """
                if len(data) != width * height * channels:
                    raise DimensionError(f'{len(data)} bytes do not match {width}x{height}x{channels}')
                return cls(np.frombuffer(data, dtype=np.uint8).reshape(height, width, channels))

        def to_pil(self) -> Image.Image:
                if self.channels == 1:
                    return Image.fromarray(self.pixels[:, :, 0])
                return Image.fromarray(self.pixels)

        def __eq__(self, other: object) -> bool:
                if not isinstance(other, ImageBuffer):
                    return NotImplemented
                return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

        def __repr__(self) -> str:
                return f'ImageBuffer(width={self.width}, height={self.height}, channels={self.channels})'


class SegMap(object):
        """
        this class holds per-pixel class labels validated against a taxonomy
        """
        __slots__ = ('labels', 'taxonomy')

        def __init__(self, labels: np.ndarray, taxonomy: ClassTaxonomy) -> None:
                """
                init label map; out-of-range labels are rejected, never clamped
                """
                labels = np.asarray(labels)
                if labels.ndim != 2 or labels.size == 0:
                    raise DimensionError(f'label map must be a nonempty 2d array, got {labels.shape}')
                if not np.issubdtype(labels.dtype, np.integer):
                    raise LabelError(f'integer class ids expected, got {labels.dtype}')
                lo, hi = int(labels.min()), int(labels.max())
                if lo < 0 or hi >= taxonomy.num_classes:
                    bad = lo if lo < 0 else hi
                    raise LabelError(f'label value {bad} outside [0, {taxonomy.num_classes})')
                self.labels = np.array(labels, dtype=np.int32, order='C', copy=True)
                self.labels.setflags(write=False)
                self.taxonomy = taxonomy

        @property
        def height(self) -> int:
                return self.labels.shape[0]

        @property
        def width(self) -> int:
                return self.labels.shape[1]

        def groups(self) -> np.ndarray:
                """
                per-pixel group indices (positions in GROUPS)
                """
                return self.taxonomy.group_lut[self.labels]

        def group_histogram(self) -> Dict[SemanticGroup, int]:
                """
                pixel count per semantic group; counts sum to width * height
                """
                counts = np.bincount(self.groups().ravel(), minlength=len(GROUPS))
                return {g: int(counts[g.index]) for g in GROUPS}

        def __eq__(self, other: object) -> bool:
                if not isinstance(other, SegMap):
                    return NotImplemented
                return self.labels.shape == other.labels.shape and bool(np.array_equal(self.labels, other.labels))


class Caption(object):
        """
        this class holds the UTF-8 scene caption
        """
        __slots__ = ('text',)

        def __init__(self, text: str) -> None:
                self.text = text

        @property
        def byte_len(self) -> int:
                return len(self.text.encode('utf-8'))

        @property
        def word_count(self) -> int:
                return len(self.text.split())

        def encode(self) -> bytes:
                return self.text.encode('utf-8')

        @classmethod
        def decode(cls, body: bytes) -> 'Caption':
                try:
                    return cls(body.decode('utf-8'))
                except UnicodeDecodeError as err:
                    raise FormatError(f'caption is not valid UTF-8: {err}') from err

        @classmethod
        def from_file(cls, path: str) -> 'Caption':
                """
                read a caption sidecar file; one trailing newline is dropped
                """
                try:
                    with open(path, 'rb') as handle:
                        body = handle.read()
                except OSError as err:
                    raise IoError(f'cannot read caption file {path}: {err}') from err
                caption = cls.decode(body)
                if caption.text.endswith('\n'):
                    caption = cls(caption.text[:-1].rstrip('\r'))
                return caption

        def __eq__(self, other: object) -> bool:
                if not isinstance(other, Caption):
                    return NotImplemented
                return self.text == other.text

        def __repr__(self) -> str:
                return f'Caption({self.text!r})'


def caption_path(image_path: str) -> str:
        """
        this function returns the caption sidecar path `<image-stem>.caption.txt`
        """
        return os.path.splitext(image_path)[0] + CAPTION_SUFFIX


def _open(path: str) -> Image.Image:
        """
        this function opens and fully decodes a PNG/JPEG file
        """
        if not os.path.isfile(path):
            raise IoError(f'no such file: {path}')
        try:
            handle = Image.open(path)
        except UnidentifiedImageError as err:
            raise FormatError(f'undecodable image: {path}') from err
        except OSError as err:
            raise IoError(f'cannot read {path}: {err}') from err
        if handle.format not in IMAGE_FORMATS:
            handle.close()
            raise FormatError(f'{path}: unsupported format {handle.format}. valid choices: PNG or JPEG')
        try:
            handle.load()
        except (OSError, SyntaxError, ValueError) as err:
            handle.close()
            raise FormatError(f'undecodable image: {path} ({err})') from err
        return handle


def load_image(path: str) -> ImageBuffer:
        """
        this function decodes a PNG/JPEG file into an 8-bit gray or RGB image
        """
        with _open(path) as handle:
            if handle.mode in ('I', 'I;16', 'I;16B', 'I;16L', 'F'):
                raise FormatError(f'{path}: only 8-bit images are supported, got mode {handle.mode}')
            # grayscale sources stay single-channel
            if handle.mode in ('1', 'L', 'LA'):
                pixels = np.asarray(handle.convert('L'))
            elif handle.mode == 'P' and handle.palette is not None and handle.palette.mode == 'L':
                pixels = np.asarray(handle.convert('L'))
            else:
                pixels = np.asarray(handle.convert('RGB'))
        return ImageBuffer(pixels)


def load_segmap(path: str, taxonomy: ClassTaxonomy) -> SegMap:
        """
        this function reads a single-channel PNG whose pixel values are class ids
        """
        with _open(path) as handle:
            if handle.format != 'PNG':
                raise FormatError(f'{path}: label maps must be PNG files')
            # palette images carry class ids as palette indices
            if handle.mode not in ('L', 'P', 'I', 'I;16', 'I;16B', 'I;16L'):
                raise FormatError(f'{path}: label map must be single-channel, got mode {handle.mode}')
            labels = np.asarray(handle)
        return SegMap(labels.astype(np.int64), taxonomy)


def save_image(img: ImageBuffer, path: str) -> None:
        """
        this function writes an image; the format follows the file extension

        WebP files are written lossless so label and edge images keep their exact values
        """
        options = {'lossless': True, 'exact': True} if path.lower().endswith('.webp') else {}
        try:
            img.to_pil().save(path, **options)
        except (OSError, ValueError, KeyError) as err:
            raise IoError(f'cannot write {path}: {err}') from err
