#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
results module
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import os
import numpy as np
import pandas as pd
from typing import Any, Iterable, Tuple

from .core import CsvError, IoError
from .metrics import RdRecord
from .plan import RdKeys, SweepPlan
from .tools import git_version

# dtypes of the rate-distortion csv columns
_DTYPES = {RdKeys.image: str, RdKeys.mode: str, RdKeys.config: str, RdKeys.quality: np.int64, \
           RdKeys.nbytes: np.int64, RdKeys.bpp: np.float64, RdKeys.psnr: np.float64, RdKeys.ms_ssim: np.float64}


def info(plan: SweepPlan, **kwargs: Any) -> str:
        """
        this function prints basic info
        """
        # init string & form
        string: str = ''
        form: Tuple[Any, ...] = ()

        # sweep info
        string += '\n\n sweep info:\n'
        string += ' -----------\n'
        string += ' corpus             =  {:}\n'
        string += ' corpus kind        =  {:}\n'
        string += ' modes              =  {:}\n'
        string += ' quality factors    =  {:}\n'
        form += (plan.corpus, plan.corpus_kind, ', '.join(plan.modes), ', '.join(str(q) for q in plan.qualities),)
        if 'samr' in plan.modes:
            string += ' masking configs    =  {:}\n'
            string += ' reconstructor      =  {:}\n'
            string += ' mask side channel  =  {:}\n'
            form += (', '.join(str(c) for c in plan.configs), plan.reconstructor, plan.mask_side_channel,)
        string += ' seed               =  {:d}\n'
        string += ' output             =  {:}\n'
        form += (plan.seed, plan.out,)
        if 'images' in kwargs:
            string += '\n images             =  {:d}\n'
            form += (kwargs['images'],)
        if 'workers' in kwargs:
            string += ' workers            =  {:d}\n'
            form += (kwargs['workers'],)

        # git version
        string += '\n git version: {:}\n\n'
        form += (git_version(),)

        return string.format(*form)


def fmt(records: Iterable[RdRecord]) -> pd.DataFrame:
        """
        this function returns records as a dataframe in column order, sorted by record key
        """
        df = pd.DataFrame([tuple(r) for r in records], columns=list(RdKeys.columns))
        return _canonical(df)


def _canonical(df: pd.DataFrame) -> pd.DataFrame:
        df = df.astype(_DTYPES)
        return df.sort_values(list(RdKeys.key), kind='mergesort').reset_index(drop=True)


def write_csv(df: pd.DataFrame, path: str) -> None:
        """
        this function writes records with the fixed column order; identical PSNR is written as `inf`
        """
        try:
            _canonical(df[list(RdKeys.columns)]).to_csv(path, index=False)
        except OSError as err:
            raise IoError(f'cannot write {path}: {err}') from err


def read_csv(path: str) -> pd.DataFrame:
        """
        this function reads and validates a rate-distortion csv
        """
        if not os.path.isfile(path):
            raise IoError(f'no such file: {path}')
        try:
            df = pd.read_csv(path, dtype={RdKeys.image: str, RdKeys.mode: str, RdKeys.config: str}, \
                             keep_default_na=False, na_values=[''], float_precision='round_trip')
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as err:
            raise CsvError(f'{path}: unreadable csv ({err})') from err
        if tuple(df.columns) != RdKeys.columns:
            raise CsvError(f'{path}: unexpected columns {list(df.columns)}. expected: {", ".join(RdKeys.columns)}')
        if df[[RdKeys.image, RdKeys.mode, RdKeys.config]].isna().any(axis=None):
            raise CsvError(f'{path}: empty key fields')
        try:
            return _canonical(df)
        except (ValueError, TypeError) as err:
            raise CsvError(f'{path}: invalid values ({err})') from err


def summarize(df: pd.DataFrame) -> pd.DataFrame:
        """
        this function returns mean and standard deviation of bytes, BPP, PSNR and MS-SSIM
        per mode, config and quality factor
        """
        metrics = [RdKeys.nbytes, RdKeys.bpp, RdKeys.psnr, RdKeys.ms_ssim]
        groups = df.groupby([RdKeys.mode, RdKeys.config, RdKeys.quality], sort=True)
        summary = groups[metrics].agg(['mean', 'std'])
        summary.columns = [f'{metric} ({stat})' for metric, stat in summary.columns]
        summary['images'] = groups.size()
        return summary.reset_index()


def matched_points(df: pd.DataFrame, target_bpp: float) -> pd.DataFrame:
        """
        this function selects, per mode and config, the quality factor whose mean BPP is closest
        to a target bitrate
        """
        summary = summarize(df)
        if summary.empty:
            return summary
        summary['distance'] = (summary[f'{RdKeys.bpp} (mean)'] - target_bpp).abs()
        idx = summary.groupby([RdKeys.mode, RdKeys.config], sort=True)['distance'].idxmin()
        return summary.loc[idx].drop(columns='distance').reset_index(drop=True)
