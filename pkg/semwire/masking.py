#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
masking module
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import math
import numpy as np
from typing import Dict, List, Optional, Tuple, Union

from .core import ImageBuffer, SegMap, SemanticGroup, GROUPS, \
                  DimensionError, RleError, ConfigError, IoError

PATCH = 8
# bounds of the training masking ratio
TRAIN_RHO = (.1, .8)

G = SemanticGroup
_ORDER = (G.VEHICLES, G.HUMANS, G.FLAT_SURFACES, G.CONSTRUCTION, G.OBJECTS, G.NATURE, G.SKY, G.BACKGROUND)
# per-config drop probabilities in _ORDER; 0, 2, 4 and 7 are the published presets,
# 1, 3, 5 and 6 are interpolated between their neighbours
_PRESETS = {
    0: (0.0, 0.2, 0.2, 0.5, 0.5, 0.8, 0.8, 0.8),
    1: (0.1, 0.3, 0.3, 0.55, 0.55, 0.8, 0.8, 0.8),
    2: (0.2, 0.4, 0.4, 0.6, 0.6, 0.8, 0.8, 0.8),
    3: (0.3, 0.45, 0.45, 0.65, 0.65, 0.8, 0.8, 0.8),
    4: (0.4, 0.5, 0.5, 0.7, 0.7, 0.8, 0.8, 0.8),
    5: (0.4, 0.53, 0.53, 0.73, 0.73, 0.83, 0.83, 0.83),
    6: (0.4, 0.57, 0.57, 0.77, 0.77, 0.87, 0.87, 0.87),
    7: (0.4, 0.6, 0.6, 0.8, 0.8, 0.9, 0.9, 0.9),
}
CONFIG_IDS = tuple(sorted(_PRESETS))
PUBLISHED_CONFIGS = (0, 2, 4, 7)


class PatchGrid(object):
        """
        this class describes the grid of 8x8 patches covering an image; edge patches may be partial
        """
        __slots__ = ('height', 'width', 'patch')

        def __init__(self, height: int, width: int, patch: int = PATCH) -> None:
                if height < patch or width < patch:
                    raise DimensionError(f'image of {width}x{height} is smaller than one {patch}x{patch} patch')
                self.height = int(height)
                self.width = int(width)
                self.patch = int(patch)

        @classmethod
        def for_image(cls, img: Union[ImageBuffer, SegMap]) -> 'PatchGrid':
                return cls(img.height, img.width)

        @property
        def n_h(self) -> int:
                return -(-self.height // self.patch)

        @property
        def n_w(self) -> int:
                return -(-self.width // self.patch)

        @property
        def size(self) -> int:
                return self.n_h * self.n_w

        def bounds(self, i: int, j: int) -> Tuple[int, int, int, int]:
                """
                pixel bounds (y0, y1, x0, x1) of patch (i, j) clipped to the image
                """
                if not (0 <= i < self.n_h and 0 <= j < self.n_w):
                    raise IndexError(f'patch ({i}, {j}) outside {self.n_h}x{self.n_w} grid')
                y0, x0 = i * self.patch, j * self.patch
                return y0, min(y0 + self.patch, self.height), x0, min(x0 + self.patch, self.width)

        def __eq__(self, other: object) -> bool:
                if not isinstance(other, PatchGrid):
                    return NotImplemented
                return (self.height, self.width, self.patch) == (other.height, other.width, other.patch)

        def __repr__(self) -> str:
                return f'PatchGrid({self.n_h}x{self.n_w} patches over {self.width}x{self.height} px)'


class MaskConfig(object):
        """
        this class holds per-group drop probabilities of one masking configuration
        """
        __slots__ = ('id', 'rho')

        def __init__(self, id: int, rho: Dict[SemanticGroup, float]) -> None:
                missing = [g.value for g in GROUPS if g not in rho]
                if missing:
                    raise ConfigError(f'masking config {id} lacks groups: {", ".join(missing)}')
                for g, p in rho.items():
                    if not 0. <= float(p) <= 1.:
                        raise ConfigError(f'masking probability of {g.value} must be in [0, 1], got {p}')
                self.id = int(id)
                self.rho = {g: float(rho[g]) for g in GROUPS}

        def rho_array(self) -> np.ndarray:
                """
                probabilities ordered like GROUPS
                """
                return np.array([self.rho[g] for g in GROUPS])

        @classmethod
        def preset(cls, id: int) -> 'MaskConfig':
                if id not in _PRESETS:
                    raise ConfigError(f'unknown masking config {id}. valid choices: 0..7')
                return cls(id, dict(zip(_ORDER, _PRESETS[id])))

        @classmethod
        def uniform(cls, rho: float, id: int = -1) -> 'MaskConfig':
                return cls(id, {g: rho for g in GROUPS})

        @classmethod
        def from_file(cls, path: str, id: int = -1) -> 'MaskConfig':
                """
                parse `Group: probability` lines (`#` starts a comment)
                """
                try:
                    with open(path, 'r', encoding='utf-8') as handle:
                        lines = handle.read().splitlines()
                except OSError as err:
                    raise IoError(f'cannot read masking config {path}: {err}') from err
                rho: Dict[SemanticGroup, float] = {}
                for n, line in enumerate(lines, start=1):
                    line = line.split('#', 1)[0].strip()
                    if not line:
                        continue
                    if ':' not in line:
                        raise ConfigError(f'{path}:{n}: expected `Group: probability`')
                    name, value = line.split(':', 1)
                    try:
                        rho[SemanticGroup.parse(name)] = float(value)
                    except ValueError as err:
                        raise ConfigError(f'{path}:{n}: invalid probability {value.strip()!r}') from err
                return cls(id, rho)

        def __repr__(self) -> str:
                probs = ', '.join(f'{g.value} {p:g}' for g, p in self.rho.items())
                return f'MaskConfig({self.id}: {probs})'


class PatchMask(object):
        """
        this class holds the binary patch grid (1 = masked) and the seed that produced it
        """
        __slots__ = ('bits', 'seed')

        def __init__(self, bits: np.ndarray, seed: Optional[int] = None) -> None:
                bits = np.asarray(bits)
                if bits.ndim != 2:
                    raise DimensionError(f'patch mask must be 2d, got {bits.shape}')
                self.bits = np.array(bits != 0, dtype=np.uint8)
                self.bits.setflags(write=False)
                self.seed = seed

        @property
        def n_h(self) -> int:
                return self.bits.shape[0]

        @property
        def n_w(self) -> int:
                return self.bits.shape[1]

        @property
        def count(self) -> int:
                return int(self.bits.sum())

        @property
        def ratio(self) -> float:
                return self.count / self.bits.size

        def matches(self, grid: PatchGrid) -> bool:
                return (self.n_h, self.n_w) == (grid.n_h, grid.n_w)

        def __eq__(self, other: object) -> bool:
                if not isinstance(other, PatchMask):
                    return NotImplemented
                return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

        def __repr__(self) -> str:
                return f'PatchMask({self.n_h}x{self.n_w}, {self.count} masked, seed={self.seed})'


def _generator(seed: int) -> np.random.Generator:
        """
        counter-based Philox stream; the k-th uniform belongs to patch k in row-major order
        """
        return np.random.Generator(np.random.Philox(key=int(seed)))


def dominant_class(segmap: SegMap, grid: PatchGrid, i: int, j: int) -> int:
        """
        this function returns the majority class of one patch; ties go to the smallest id
        """
        y0, y1, x0, x1 = grid.bounds(i, j)
        counts = np.bincount(segmap.labels[y0:y1, x0:x1].ravel(), minlength=segmap.taxonomy.num_classes)
        return int(np.argmax(counts))


def dominant_classes(segmap: SegMap, grid: PatchGrid) -> np.ndarray:
        """
        this function returns the (n_h, n_w) majority classes of all patches at once
        """
        _check_cover(segmap, grid)
        c = segmap.taxonomy.num_classes
        p = grid.patch
        # pad with a sentinel class that never wins
        padded = np.full((grid.n_h * p, grid.n_w * p), c, dtype=np.int64)
        padded[:grid.height, :grid.width] = segmap.labels
        patch_idx = np.arange(grid.size, dtype=np.int64).reshape(grid.n_h, 1, grid.n_w, 1)
        patch_idx = np.broadcast_to(patch_idx, (grid.n_h, p, grid.n_w, p)).reshape(padded.shape)
        counts = np.bincount((patch_idx * (c + 1) + padded).ravel(), minlength=grid.size * (c + 1))
        counts = counts.reshape(grid.size, c + 1)[:, :c]
        return np.argmax(counts, axis=1).reshape(grid.n_h, grid.n_w)


def semantic_mask(segmap: SegMap, config: MaskConfig, grid: PatchGrid, seed: int) -> PatchMask:
        """
        this function draws one Bernoulli(rho[group of dominant class]) sample per patch
        """
        classes = dominant_classes(segmap, grid)
        probs = config.rho_array()[segmap.taxonomy.group_lut[classes]]
        uniforms = _generator(seed).random(grid.size).reshape(grid.n_h, grid.n_w)
        return PatchMask(uniforms < probs, seed=seed)


def random_mask(grid: PatchGrid, rho: float, seed: int) -> PatchMask:
        """
        this function masks exactly floor(rho * n_h * n_w) distinct patches, drawn uniformly
        """
        assert 0. <= rho <= 1., 'invalid masking ratio. valid choices: 0 <= rho <= 1'
        # tolerance absorbs binary representation of decimal ratios
        k = min(int(math.floor(rho * grid.size + 1.e-9)), grid.size)
        bits = np.zeros(grid.size, dtype=np.uint8)
        bits[_generator(seed).permutation(grid.size)[:k]] = 1
        return PatchMask(bits.reshape(grid.n_h, grid.n_w), seed=seed)


def sample_training_ratio(seed: int, bounds: Tuple[float, float] = TRAIN_RHO) -> float:
        """
        this function draws a masking ratio ~ Uniform(0.1, 0.8) for semantic-agnostic masking
        """
        return float(_generator(seed).uniform(*bounds))


def pixel_mask(mask: PatchMask, height: int, width: int, patch: int = PATCH) -> np.ndarray:
        """
        this function expands a patch mask to a (height, width) boolean pixel mask
        """
        if -(-height // patch) != mask.n_h or -(-width // patch) != mask.n_w:
            raise DimensionError(f'{mask.n_h}x{mask.n_w} patch mask does not cover {width}x{height} px')
        full = np.repeat(np.repeat(mask.bits.astype(bool), patch, axis=0), patch, axis=1)
        return full[:height, :width]


def apply_mask(img: ImageBuffer, mask: PatchMask) -> ImageBuffer:
        """
        this function zero-fills masked patches in every channel; other bytes are untouched
        """
        pm = pixel_mask(mask, img.height, img.width)
        out = img.pixels.copy()
        out[pm] = 0
        return ImageBuffer(out)


def _check_cover(segmap: SegMap, grid: PatchGrid) -> None:
        if (segmap.height, segmap.width) != (grid.height, grid.width):
            raise DimensionError(f'label map of {segmap.width}x{segmap.height} does not match ' \
                                 f'grid over {grid.width}x{grid.height} px')


def _varint(n: int) -> bytes:
        out = bytearray()
        while True:
            byte = n & 0x7f
            n >>= 7
            if n:
                out.append(byte | 0x80)
            else:
                out.append(byte)
                return bytes(out)


def mask_to_rle(mask: PatchMask) -> bytes:
        """
        this function run-length encodes the row-major bits

        layout: first bit value (one byte), then LEB128 run lengths of alternating values
        """
        flat = mask.bits.ravel()
        bounds = np.flatnonzero(np.diff(flat)) + 1
        runs = np.diff(np.concatenate(([0], bounds, [flat.size])))
        return bytes([int(flat[0])]) + b''.join(_varint(int(r)) for r in runs)


def rle_to_mask(data: bytes, n_h: int, n_w: int) -> PatchMask:
        """
        this function decodes mask_to_rle output for an n_h x n_w grid
        """
        data = bytes(data)
        total = n_h * n_w
        if not data:
            raise RleError('empty run-length stream')
        if data[0] not in (0, 1):
            raise RleError(f'invalid leading bit value {data[0]}')
        bits = np.empty(total, dtype=np.uint8)
        value, pos, filled = data[0], 1, 0
        while pos < len(data):
            run, shift = 0, 0
            while True:
                if pos >= len(data):
                    raise RleError('truncated run length')
                byte = data[pos]
                pos += 1
                run |= (byte & 0x7f) << shift
                shift += 7
                if not byte & 0x80:
                    break
            if run == 0:
                raise RleError('zero-length run')
            if filled + run > total:
                raise RleError(f'runs exceed the {n_h}x{n_w} grid')
            bits[filled:filled + run] = value
            filled += run
            value ^= 1
        if filled != total:
            raise RleError(f'runs cover {filled} of {total} patches')
        return PatchMask(bits.reshape(n_h, n_w))
