#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
metrics module
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import logging
import numpy as np
from scipy import ndimage
from typing import List, NamedTuple, Tuple, Union

from .core import ImageBuffer, DimensionError
from .edges import luma

logger = logging.getLogger(__name__)

MAX_VAL = 255.
# ssim constants
K1 = .01
K2 = .03
WIN_SIZE = 11
WIN_SIGMA = 1.5
# canonical multi-scale weights (finest to coarsest)
MS_WEIGHTS = np.array([.0448, .2856, .3001, .2363, .1333])


class RdRecord(NamedTuple):
        """
        one rate-distortion operating point
        """
        image: str
        mode: str
        config: str
        Q: int
        bytes: int
        bpp: float
        psnr_db: float
        ms_ssim: float

        @classmethod
        def make(cls, image: str, mode: str, config: Union[int, str], quality: int, nbytes: int, \
                 width: int, height: int, psnr_db: float, ms_ssim: float) -> 'RdRecord':
                return cls(image, mode, str(config), int(quality), int(nbytes), \
                           bpp(nbytes, width, height), float(psnr_db), float(ms_ssim))


def _check_pair(a: ImageBuffer, b: ImageBuffer) -> None:
        if a.pixels.shape != b.pixels.shape:
            raise DimensionError(f'image shapes differ: {a.pixels.shape} vs {b.pixels.shape}')


def bpp(payload_bytes: int, width: int, height: int) -> float:
        """
        this function returns bits per pixel of a payload
        """
        assert width > 0 and height > 0, 'invalid dimensions. valid choices: width, height > 0'
        return payload_bytes * 8. / (width * height)


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
        """
        this function returns PSNR in dB over all samples (RGB jointly); inf for identical images
        """
        _check_pair(a, b)
        diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
        mse = np.mean(diff * diff)
        if mse == 0.:
            return float('inf')
        return float(10. * np.log10(MAX_VAL**2 / mse))


def gaussian_window(size: int = WIN_SIZE, sigma: float = WIN_SIGMA) -> np.ndarray:
        """
        this function returns a normalized 1d gaussian window
        """
        x = np.arange(size) - (size - 1) / 2.
        g = np.exp(-x**2 / (2. * sigma**2))
        return g / g.sum()


def _filter_valid(x: np.ndarray, win: np.ndarray) -> np.ndarray:
        """
        separable gaussian filtering keeping only fully covered ('valid') positions
        """
        r = win.size // 2
        out = ndimage.correlate1d(x, win, axis=0, mode='nearest')
        out = ndimage.correlate1d(out, win, axis=1, mode='nearest')
        return out[r:x.shape[0]-r, r:x.shape[1]-r]


def ssim_components(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
        """
        this function returns mean SSIM and mean contrast-structure term of two float planes
        """
        if min(x.shape) < WIN_SIZE:
            raise DimensionError(f'planes of {x.shape} are smaller than the {WIN_SIZE}x{WIN_SIZE} window')
        c1 = (K1 * MAX_VAL)**2
        c2 = (K2 * MAX_VAL)**2
        win = gaussian_window()
        mu_x = _filter_valid(x, win)
        mu_y = _filter_valid(y, win)
        sigma_xx = _filter_valid(x * x, win) - mu_x * mu_x
        sigma_yy = _filter_valid(y * y, win) - mu_y * mu_y
        sigma_xy = _filter_valid(x * y, win) - mu_x * mu_y
        cs_map = (2. * sigma_xy + c2) / (sigma_xx + sigma_yy + c2)
        l_map = (2. * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
        return float(np.mean(l_map * cs_map)), float(np.mean(cs_map))


def ssim(a: ImageBuffer, b: ImageBuffer) -> float:
        """
        this function returns single-scale SSIM on luma
        """
        _check_pair(a, b)
        return ssim_components(luma(a), luma(b))[0]


def _halve(x: np.ndarray) -> np.ndarray:
        """
        2x2 average then subsample
        """
        h, w = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
        x = x[:h, :w]
        return .25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def max_scales(height: int, width: int) -> int:
        """
        this function returns how many dyadic scales fit an 11x11 window (at most 5)
        """
        n = 0
        side = min(height, width)
        while n < MS_WEIGHTS.size and side >= WIN_SIZE * 2**n:
            n += 1
        return n


def ms_ssim(a: ImageBuffer, b: ImageBuffer, return_scales: bool = False) -> Union[float, Tuple[float, int]]:
        """
        this function returns 5-scale MS-SSIM on luma

        images below 176 px fall back to fewer scales with renormalized weights
        """
        _check_pair(a, b)
        n_scales = max_scales(a.height, a.width)
        if n_scales == 0:
            raise DimensionError(f'{a.width}x{a.height} is too small for MS-SSIM (min {WIN_SIZE} px)')
        if n_scales < MS_WEIGHTS.size:
            logger.warning('MS-SSIM on %dx%d uses %d of %d scales', a.width, a.height, n_scales, MS_WEIGHTS.size)
        weights = MS_WEIGHTS[:n_scales] / MS_WEIGHTS[:n_scales].sum()
        x, y = luma(a), luma(b)
        values: List[float] = []
        for scale in range(n_scales):
            s, cs = ssim_components(x, y)
            values.append(s if scale == n_scales - 1 else cs)
            x, y = _halve(x), _halve(y)
        # negative terms would make fractional powers undefined
        terms = np.clip(np.array(values), 0., None)
        score = float(np.clip(np.prod(terms**weights), 0., 1.))
        if return_scales:
            return score, n_scales
        return score
