#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
edges module
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import numpy as np
from scipy import ndimage
from typing import Tuple

from .core import ImageBuffer, DimensionError
from .tools import contract

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([.299, .587, .114])
# canny defaults
CANNY_LOW = 100
CANNY_HIGH = 200
BLUR_SIZE = 5
BLUR_SIGMA = 1.4
EDGE = 255
# magnitudes closer than this count as a tie in non-maximum suppression
TIE_EPS = 1.e-6

SOBEL_X = np.array([[-1., 0., 1.], [-2., 0., 2.], [-1., 0., 1.]])
SOBEL_Y = SOBEL_X.T.copy()


class EdgeMap(object):
        """
        this class holds a binary edge map stored as 0/255 samples
        """
        __slots__ = ('data',)

        def __init__(self, data: np.ndarray) -> None:
                data = np.asarray(data)
                if data.ndim != 2:
                    raise DimensionError(f'edge map must be 2d, got {data.shape}')
                if not np.all((data == 0) | (data == EDGE)):
                    raise ValueError('edge map values must be 0 or 255')
                self.data = np.array(data, dtype=np.uint8, copy=True)
                self.data.setflags(write=False)

        @property
        def height(self) -> int:
                return self.data.shape[0]

        @property
        def width(self) -> int:
                return self.data.shape[1]

        def to_image(self) -> ImageBuffer:
                return ImageBuffer(self.data)

        def __eq__(self, other: object) -> bool:
                if not isinstance(other, EdgeMap):
                    return NotImplemented
                return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))


def luma(img: ImageBuffer) -> np.ndarray:
        """
        this function returns unrounded float luma of an image
        """
        if img.channels == 1:
            return img.pixels[:, :, 0].astype(np.float64)
        return contract('hwc,c->hw', img.pixels.astype(np.float64), LUMA_WEIGHTS)


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
        """
        this function converts RGB to 8-bit luma; gray input is returned unchanged
        """
        if img.channels == 1:
            return img
        gray = np.clip(np.floor(luma(img) + .5), 0., 255.)
        return ImageBuffer(gray.astype(np.uint8))


def gaussian_kernel(size: int = BLUR_SIZE, sigma: float = BLUR_SIGMA) -> np.ndarray:
        """
        this function returns a normalized square gaussian kernel
        """
        half = size // 2
        y, x = np.mgrid[-half:half+1, -half:half+1]
        g = np.exp(-(x**2 + y**2) / (2. * sigma**2))
        return g / g.sum()


def gradients(gray: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        this function returns the euclidean gradient magnitude and the angle in degrees [0, 180)
        """
        # replicate padding throughout
        smooth = ndimage.correlate(gray, gaussian_kernel(), mode='nearest')
        gx = ndimage.correlate(smooth, SOBEL_X, mode='nearest')
        gy = ndimage.correlate(smooth, SOBEL_Y, mode='nearest')
        mag = np.hypot(gx, gy)
        angle = np.rad2deg(np.arctan2(gy, gx)) % 180.
        return mag, angle


def non_max_suppression(mag: np.ndarray, angle: np.ndarray) -> np.ndarray:
        """
        this function thins ridges to single pixels using four direction bins

        a pixel survives if it is strictly above its backward neighbor and not below
        its forward neighbor, so plateaus of width two collapse to one pixel
        """
        h, w = mag.shape
        padded = np.pad(mag, 1, mode='constant')
        centre = padded[1:h+1, 1:w+1]

        def shifted(dy: int, dx: int) -> np.ndarray:
            return padded[1+dy:h+1+dy, 1+dx:w+1+dx]

        # direction bins (y axis points down)
        bin_0 = (angle < 22.5) | (angle >= 157.5)
        bin_45 = (angle >= 22.5) & (angle < 67.5)
        bin_90 = (angle >= 67.5) & (angle < 112.5)
        bin_135 = (angle >= 112.5) & (angle < 157.5)
        keep = np.zeros(mag.shape, dtype=bool)
        for sel, (dy, dx) in ((bin_0, (0, 1)), (bin_45, (1, 1)), (bin_90, (1, 0)), (bin_135, (1, -1))):
            keep |= sel & (centre > shifted(-dy, -dx) + TIE_EPS) & (centre >= shifted(dy, dx) - TIE_EPS)
        return np.where(keep, mag, 0.)


def hysteresis(thin: np.ndarray, low: float, high: float) -> np.ndarray:
        """
        this function keeps weak pixels 8-connected to at least one strong pixel
        """
        strong = thin > high
        candidate = thin > low
        labels, n = ndimage.label(candidate, structure=np.ones((3, 3), dtype=bool))
        if n == 0:
            return np.zeros(thin.shape, dtype=bool)
        keep_ids = np.unique(labels[strong])
        keep_ids = keep_ids[keep_ids > 0]
        return np.isin(labels, keep_ids)


def canny(gray: ImageBuffer, low: float = CANNY_LOW, high: float = CANNY_HIGH) -> EdgeMap:
        """
        this function runs the canny pipeline: 5x5 gaussian blur (sigma 1.4), 3x3 sobel,
        non-maximum suppression and double-threshold hysteresis with 8-connectivity
        """
        assert 0 <= low <= high <= 255, \
            'invalid canny thresholds. valid choices: 0 <= low <= high <= 255'
        if gray.channels != 1:
            raise DimensionError(f'canny expects a single-channel image, got {gray.channels} channels')
        if gray.width < BLUR_SIZE or gray.height < BLUR_SIZE:
            raise DimensionError(f'image of {gray.width}x{gray.height} is smaller than the ' \
                                 f'{BLUR_SIZE}x{BLUR_SIZE} kernel support')
        mag, angle = gradients(gray.pixels[:, :, 0].astype(np.float64))
        thin = non_max_suppression(mag, angle)
        edges = hysteresis(thin, low, high)
        return EdgeMap(np.where(edges, EDGE, 0).astype(np.uint8))


def edge_density(edges: EdgeMap) -> float:
        """
        this function returns the fraction of edge pixels
        """
        return float(np.count_nonzero(edges.data)) / edges.data.size
