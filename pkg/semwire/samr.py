#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
samr module

semantic-aware masking: the sender zero-fills low-importance patches before
encoding, the receiver recovers the mask and inpaints the holes
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import os
import logging
import tempfile
import warnings
import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import splu
from typing import Optional, Tuple

from .core import ImageBuffer, SegMap, ConvergenceWarning, DimensionError, ExternalError, \
                  ContainerError, SemwireError, load_image, save_image
from .container import Entry, PayloadContainer, Tags, make_meta, parse_meta
from .masking import PatchGrid, PatchMask, MaskConfig, semantic_mask, apply_mask, pixel_mask, \
                     mask_to_rle, rle_to_mask
from .codec import Format, EncodedBlob, encode, decode
from .tools import run_external

logger = logging.getLogger(__name__)

# mean intensity at or below which a decoded patch counts as zero-filled
DETECT_TAU = 12.
HARMONIC_TOL = .1
HARMONIC_MAX_ITER = 5000
# loss weights of masked / unmasked regions
W_MASKED = .7
W_UNMASKED = .3
SOLVERS = ('gauss-seidel', 'direct')


class SamrBitstream(object):
        """
        this class holds the transmitted SAMR bitstream: the masked JPEG/WebP stream,
        an optional run-length mask side channel and the metadata needed to decode it
        """
        __slots__ = ('blob', 'mask_rle', 'config_id', 'quality', 'seed', 'n_h', 'n_w')

        def __init__(self, blob: EncodedBlob, config_id: int, seed: int, n_h: int, n_w: int, \
                     mask_rle: Optional[bytes] = None) -> None:
                self.blob = blob
                self.config_id = int(config_id)
                self.quality = blob.quality
                self.seed = int(seed)
                self.n_h = int(n_h)
                self.n_w = int(n_w)
                if mask_rle is not None:
                    # side channel must decode to the announced grid
                    rle_to_mask(mask_rle, self.n_h, self.n_w)
                self.mask_rle = mask_rle

        @property
        def side_mask(self) -> Optional[PatchMask]:
                if self.mask_rle is None:
                    return None
                return rle_to_mask(self.mask_rle, self.n_h, self.n_w)

        def to_container(self) -> PayloadContainer:
                meta = make_meta(kind='samr', width=self.blob.src_w, height=self.blob.src_h, \
                                 channels=self.blob.channels, format=self.blob.format.value, \
                                 quality=self.blob.quality, config=self.config_id, seed=self.seed, \
                                 grid=[self.n_h, self.n_w])
                entries = [Entry(Tags.jpg, self.blob.data), Entry(Tags.met, meta)]
                if self.mask_rle is not None:
                    entries.append(Entry(Tags.msk, self.mask_rle))
                return PayloadContainer(entries)

        @classmethod
        def from_container(cls, container: PayloadContainer) -> 'SamrBitstream':
                meta = parse_meta(container.require(Tags.met))
                if meta.get('kind') != 'samr':
                    raise ContainerError(f'not a SAMR container (kind: {meta.get("kind")!r})')
                try:
                    blob = EncodedBlob(Format(meta['format']), meta['quality'], container.require(Tags.jpg), \
                                       int(meta['width']), int(meta['height']), int(meta['channels']))
                    n_h, n_w = (int(n) for n in meta['grid'])
                    return cls(blob, int(meta['config']), int(meta['seed']), n_h, n_w, container.get(Tags.msk))
                except (KeyError, TypeError, ValueError) as err:
                    raise ContainerError(f'incomplete SAMR metadata: {err}') from err

        @property
        def nbytes(self) -> int:
                """
                serialized container size, i.e., every transmitted byte
                """
                return self.to_container().total_bytes

        def __repr__(self) -> str:
                side = ', mask side channel' if self.mask_rle is not None else ''
                return f'SamrBitstream(config {self.config_id}, {self.blob!r}{side})'


def samr_encode(img: ImageBuffer, seg: SegMap, config: MaskConfig, quality: int, seed: int, \
                with_mask_side_channel: bool = False, format: Format = Format.JPEG) -> SamrBitstream:
        """
        this function masks an image by its semantics and encodes it
        """
        if (seg.height, seg.width) != (img.height, img.width):
            raise DimensionError(f'label map of {seg.width}x{seg.height} does not match ' \
                                 f'image of {img.width}x{img.height}')
        grid = PatchGrid.for_image(img)
        mask = semantic_mask(seg, config, grid, seed)
        blob = encode(apply_mask(img, mask), format, quality)
        logger.debug('samr encode: config %d, Q %s, %d of %d patches masked, %d B', \
                     config.id, quality, mask.count, grid.size, blob.nbytes)
        rle = mask_to_rle(mask) if with_mask_side_channel else None
        return SamrBitstream(blob, config.id, seed, grid.n_h, grid.n_w, rle)


def patch_means(img: ImageBuffer, grid: PatchGrid) -> np.ndarray:
        """
        this function returns the (n_h, n_w) mean intensity of each patch over its pixels and channels
        """
        p = grid.patch
        padded = np.zeros((grid.n_h * p, grid.n_w * p, img.channels))
        padded[:img.height, :img.width] = img.pixels
        sums = padded.reshape(grid.n_h, p, grid.n_w, p, img.channels).sum(axis=(1, 3, 4))
        # partial edge patches average over their own pixels
        rows = np.diff(np.minimum(np.arange(grid.n_h + 1) * p, grid.height))
        cols = np.diff(np.minimum(np.arange(grid.n_w + 1) * p, grid.width))
        return sums / (np.outer(rows, cols) * img.channels)


def detect_mask(decoded: ImageBuffer, grid: PatchGrid, tau: float = DETECT_TAU) -> PatchMask:
        """
        this function flags patches whose mean intensity is at most tau as zero-filled

        genuinely dark content is flagged too
        """
        assert 0. <= tau <= 255., 'invalid detection threshold. valid choices: 0 <= tau <= 255'
        if (decoded.height, decoded.width) != (grid.height, grid.width):
            raise DimensionError(f'image of {decoded.width}x{decoded.height} does not match {grid!r}')
        return PatchMask(patch_means(decoded, grid) <= tau)


def mask_f1(detected: PatchMask, true: PatchMask) -> float:
        """
        this function returns the patch-level F1 score of a detected mask; 1. when both are empty
        """
        if detected.bits.shape != true.bits.shape:
            raise DimensionError(f'mask shapes differ: {detected.bits.shape} vs {true.bits.shape}')
        d, t = detected.bits.astype(bool), true.bits.astype(bool)
        tp = np.count_nonzero(d & t)
        denom = np.count_nonzero(d) + np.count_nonzero(t)
        if denom == 0:
            return 1.
        return 2. * tp / denom


def _neighbour_counts(h: int, w: int) -> np.ndarray:
        """
        number of in-image 4-neighbours of every pixel
        """
        inside = np.pad(np.ones((h, w)), 1)
        return inside[:-2, 1:-1] + inside[2:, 1:-1] + inside[1:-1, :-2] + inside[1:-1, 2:]


def _gauss_seidel(values: np.ndarray, mask: np.ndarray, tol: float, max_iter: int) -> Tuple[np.ndarray, int, float]:
        """
        red-black gauss-seidel sweeps on a zero-padded copy; returns (solution, sweeps, last update)
        """
        h, w, c = values.shape
        # start from the nearest known pixel
        _, (iy, ix) = ndimage.distance_transform_edt(mask, return_indices=True)
        stride = w + 2
        padded = np.zeros((h + 2, stride, c))
        padded[1:-1, 1:-1] = values[iy, ix]
        flat = padded.reshape(-1, c)
        inv_counts = 1. / _neighbour_counts(h, w)
        ys, xs = np.nonzero(mask)
        sweeps = []
        for colour in (0, 1):
            sel = (ys + xs) % 2 == colour
            sweeps.append(((ys[sel] + 1) * stride + xs[sel] + 1, inv_counts[ys[sel], xs[sel]][:, None]))
        delta = np.inf
        for n_iter in range(1, max_iter + 1):
            delta = 0.
            for idx, inv in sweeps:
                if idx.size == 0:
                    continue
                new = (flat[idx - 1] + flat[idx + 1] + flat[idx - stride] + flat[idx + stride]) * inv
                delta = max(delta, float(np.max(np.abs(new - flat[idx]))))
                flat[idx] = new
            if delta < tol:
                break
        return padded[1:-1, 1:-1].copy(), n_iter, delta


def _direct(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
        """
        sparse LU solve of the same Laplace system
        """
        h, w, c = values.shape
        ys, xs = np.nonzero(mask)
        m = ys.size
        unknowns = np.arange(m)
        grid = -np.ones((h + 2, w + 2), dtype=np.int64)
        grid[ys + 1, xs + 1] = unknowns
        inside = np.pad(np.ones((h, w), dtype=bool), 1)
        rows, cols = [unknowns], [unknowns]
        coeffs = [_neighbour_counts(h, w)[ys, xs]]
        rhs = np.zeros((m, c))
        for dy, dx in ((-1, 0), (0, 1), (1, 0), (0, -1)):
            ny, nx = ys + 1 + dy, xs + 1 + dx
            nb = grid[ny, nx]
            linked = nb >= 0
            rows.append(unknowns[linked])
            cols.append(nb[linked])
            coeffs.append(-np.ones(np.count_nonzero(linked)))
            fixed = inside[ny, nx] & ~linked
            rhs[fixed] += values[ny[fixed] - 1, nx[fixed] - 1]
        lap = sparse.coo_matrix((np.concatenate(coeffs), (np.concatenate(rows), np.concatenate(cols))), \
                                shape=(m, m)).tocsc()
        out = values.copy()
        out[ys, xs] = splu(lap).solve(rhs).reshape(m, c)
        return out


def harmonic_fill(values: np.ndarray, mask: np.ndarray, tol: float = HARMONIC_TOL, \
                  max_iter: int = HARMONIC_MAX_ITER, solver: str = 'gauss-seidel') -> np.ndarray:
        """
        this function solves the discrete Laplace equation on masked pixels of a float
        (h, w, c) array with unmasked pixels as Dirichlet data

        each masked pixel becomes the mean of its in-image 4-neighbours; unmasked pixels are kept
        """
        assert solver in SOLVERS, f'invalid solver. valid choices: {", ".join(SOLVERS)}'
        assert tol > 0. and max_iter > 0, 'invalid solver limits. valid choices: tol > 0, max_iter > 0'
        values = np.asarray(values, dtype=np.float64)
        mask = np.asarray(mask, dtype=bool)
        if values.shape[:2] != mask.shape:
            raise DimensionError(f'mask of {mask.shape} does not match values of {values.shape[:2]}')
        if not mask.any():
            return values.copy()
        if mask.all():
            logger.warning('every pixel is masked, nothing to interpolate from')
            return values.copy()
        if solver == 'direct':
            return _direct(values, mask)
        out, n_iter, delta = _gauss_seidel(values, mask, tol, max_iter)
        if delta >= tol:
            warnings.warn(f'harmonic inpainting stopped after {max_iter} sweeps ' \
                          f'(last update {delta:.3g} >= tol {tol:g})', ConvergenceWarning, stacklevel=3)
        else:
            logger.debug('harmonic inpainting converged after %d sweeps', n_iter)
        out[~mask] = values[~mask]
        return out


def inpaint_harmonic(decoded: ImageBuffer, mask: PatchMask, max_iter: int = HARMONIC_MAX_ITER, \
                     tol: float = HARMONIC_TOL, solver: str = 'gauss-seidel') -> ImageBuffer:
        """
        this function fills masked patches by harmonic interpolation; unmasked pixels pass through
        """
        pm = pixel_mask(mask, decoded.height, decoded.width)
        filled = harmonic_fill(decoded.pixels, pm, tol=tol, max_iter=max_iter, solver=solver)
        out = decoded.pixels.copy()
        out[pm] = np.clip(np.floor(filled[pm] + .5), 0., 255.).astype(np.uint8)
        return ImageBuffer(out)


class Reconstructor(object):
        """
        this class selects the receiver-side reconstruction: harmonic inpainting or an external
        command template with {input}, {mask} and {out} placeholders
        """
        __slots__ = ('kind', 'cmd', 'tol', 'max_iter', 'solver', 'timeout')

        def __init__(self, kind: str = 'harmonic', cmd: Optional[str] = None, tol: float = HARMONIC_TOL, \
                     max_iter: int = HARMONIC_MAX_ITER, solver: str = 'gauss-seidel', \
                     timeout: Optional[float] = None) -> None:
                assert kind in ('harmonic', 'external'), 'invalid reconstructor. valid choices: harmonic or ext:<cmd>'
                assert kind == 'harmonic' or cmd, 'external reconstructor requires a command template'
                self.kind = kind
                self.cmd = cmd
                self.tol = tol
                self.max_iter = max_iter
                self.solver = solver
                self.timeout = timeout

        @classmethod
        def parse(cls, spec: str, **kwargs) -> 'Reconstructor':
                """
                `harmonic` or `ext:<command template>`
                """
                if spec == 'harmonic':
                    return cls('harmonic', **kwargs)
                if spec.startswith('ext:') and spec[4:].strip():
                    return cls('external', cmd=spec[4:].strip(), **kwargs)
                raise ValueError(f'invalid reconstructor {spec!r}. valid choices: harmonic or ext:<cmd>')

        def __call__(self, decoded: ImageBuffer, mask: PatchMask) -> ImageBuffer:
                if self.kind == 'harmonic':
                    return inpaint_harmonic(decoded, mask, max_iter=self.max_iter, tol=self.tol, solver=self.solver)
                return self._external(decoded, mask)

        def _external(self, decoded: ImageBuffer, mask: PatchMask) -> ImageBuffer:
                pm = pixel_mask(mask, decoded.height, decoded.width)
                with tempfile.TemporaryDirectory(prefix='semwire-') as tmp:
                    paths = {'input': os.path.join(tmp, 'masked.png'), 'mask': os.path.join(tmp, 'mask.png'), \
                             'out': os.path.join(tmp, 'out.png')}
                    save_image(decoded, paths['input'])
                    save_image(ImageBuffer(np.where(pm, 255, 0).astype(np.uint8)), paths['mask'])
                    kwargs = {} if self.timeout is None else {'timeout': self.timeout}
                    run_external(self.cmd, paths, **kwargs)
                    try:
                        out = load_image(paths['out'])
                    except SemwireError as err:
                        raise ExternalError(f'external reconstructor produced no readable image: {err}') from err
                if (out.width, out.height) != (decoded.width, decoded.height):
                    raise ExternalError(f'external reconstructor returned {out.width}x{out.height}, ' \
                                        f'expected {decoded.width}x{decoded.height}')
                return out

        def __repr__(self) -> str:
                if self.kind == 'harmonic':
                    return f'Reconstructor(harmonic, {self.solver}, tol={self.tol:g}, max_iter={self.max_iter})'
                return f'Reconstructor(ext:{self.cmd})'


def recover_mask(bs: SamrBitstream, decoded: ImageBuffer, tau: float = DETECT_TAU) -> PatchMask:
        """
        this function returns the side-channel mask when present, else the detected one
        """
        grid = PatchGrid(decoded.height, decoded.width)
        if (grid.n_h, grid.n_w) != (bs.n_h, bs.n_w):
            raise DimensionError(f'{decoded.width}x{decoded.height} px do not match the ' \
                                 f'{bs.n_h}x{bs.n_w} grid of the bitstream')
        side = bs.side_mask
        if side is not None:
            return side
        return detect_mask(decoded, grid, tau)


def samr_decode(bs: SamrBitstream, rec: Optional[Reconstructor] = None, tau: float = DETECT_TAU) -> ImageBuffer:
        """
        this function decodes a SAMR bitstream and reconstructs the masked patches
        """
        rec = rec or Reconstructor()
        decoded = decode(bs.blob)
        mask = recover_mask(bs, decoded, tau)
        logger.debug('samr decode: %d of %d patches to reconstruct (%s)', \
                     mask.count, mask.bits.size, 'side channel' if bs.mask_rle is not None else 'detected')
        if mask.count == 0:
            return decoded
        return rec(decoded, mask)


def masked_l1(pred: ImageBuffer, target: ImageBuffer, mask: PatchMask, \
              w_masked: float = W_MASKED, w_unmasked: float = W_UNMASKED) -> float:
        """
        this function returns the mask-weighted L1 loss; each region is averaged over its own
        samples and an empty region contributes nothing
        """
        assert w_masked >= 0. and w_unmasked >= 0., 'invalid loss weights. valid choices: w >= 0'
        if pred.pixels.shape != target.pixels.shape:
            raise DimensionError(f'image shapes differ: {pred.pixels.shape} vs {target.pixels.shape}')
        pm = pixel_mask(mask, pred.height, pred.width)
        diff = np.abs(pred.pixels.astype(np.float64) - target.pixels.astype(np.float64))
        loss = 0.
        if pm.any():
            loss += w_masked * float(np.mean(diff[pm]))
        if not pm.all():
            loss += w_unmasked * float(np.mean(diff[~pm]))
        return loss
