#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
plan module
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import os
from typing import List, Optional, Sequence

from .core import ConfigError
from .masking import CONFIG_IDS

MODES = ('jpeg-only', 'samr', 'mmsd-payload')
MODE_ALIASES = {'jpeg': 'jpeg-only', 'mmsd': 'mmsd-payload'}
CORPUS_KINDS = ('generic', 'cityscapes')
# 15 quality levels
DEFAULT_QUALITIES = (1, 3, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95, 98, 100)
DEFAULT_CONFIGS = (0, 2, 4, 7)
JOBS_ENV = 'SEMWIRE_JOBS'


# record keys
class RdKeys:
        image = 'image'
        mode = 'mode'
        config = 'config'
        quality = 'Q'
        nbytes = 'bytes'
        bpp = 'bpp'
        psnr = 'psnr_db'
        ms_ssim = 'ms_ssim'
        columns = (image, mode, config, quality, nbytes, bpp, psnr, ms_ssim)
        key = (image, mode, config, quality)

# config labels of records without a masking config
JPEG_CONFIG = 'jpeg-only'
MMSD_CONFIG = 'mmsd'


def parse_modes(modes: Sequence[str]) -> List[str]:
        """
        this function maps cli aliases (jpeg, mmsd) onto mode names
        """
        return [MODE_ALIASES.get(m.strip(), m.strip()) for m in modes if m.strip()]


class SweepPlan(object):
        """
        this class contains all rate-distortion sweep attributes
        """
        __slots__ = ('corpus', 'out', 'modes', 'qualities', 'configs', 'seed', 'reconstructor', \
                     'mask_side_channel', 'corpus_kind', 'taxonomy', 'jobs', 'verbose')

        def __init__(self, corpus: str, out: str = 'out', modes: Sequence[str] = ('jpeg-only', 'samr'), \
                     qualities: Sequence[int] = DEFAULT_QUALITIES, configs: Sequence[int] = DEFAULT_CONFIGS, \
                     seed: int = 0, reconstructor: str = 'harmonic', mask_side_channel: bool = False, \
                     corpus_kind: str = 'generic', taxonomy: Optional[str] = None, \
                     jobs: Optional[int] = None, verbose: int = 0) -> None:
                """
                init sweep attributes
                """
                # set system defaults
                self.corpus = corpus
                self.out = out
                self.modes = parse_modes(modes)
                self.qualities = list(qualities)
                self.configs = list(configs)
                self.seed = seed
                self.reconstructor = reconstructor
                self.mask_side_channel = mask_side_channel
                self.corpus_kind = corpus_kind
                self.taxonomy = taxonomy
                self.jobs = jobs
                self.verbose = verbose

        def workers(self) -> int:
                """
                worker count: plan value, then SEMWIRE_JOBS, then the cpu count
                """
                if self.jobs is not None:
                    return self.jobs
                env = os.environ.get(JOBS_ENV, '').strip()
                if env:
                    try:
                        return max(1, int(env))
                    except ValueError:
                        raise ConfigError(f'invalid {JOBS_ENV}={env!r}. valid choices: positive integers') from None
                return os.cpu_count() or 1

        @property
        def csv_path(self) -> str:
                return os.path.join(self.out, 'rd.csv')


def sanity_check(plan: SweepPlan) -> None:
        """
        this function performs sanity checks of sweep attributes
        """
        # corpus
        assert isinstance(plan.corpus, str) and plan.corpus, \
            'invalid corpus. must be a directory path'
        # output directory
        assert isinstance(plan.out, str) and plan.out, \
            'invalid output directory. must be a directory path'
        # modes
        assert plan.modes and all(m in MODES for m in plan.modes), \
            'invalid modes. valid choices: `jpeg-only` (`jpeg`), `samr`, or `mmsd-payload` (`mmsd`)'
        assert len(set(plan.modes)) == len(plan.modes), \
            'invalid modes. modes must not repeat'
        # quality factors
        assert plan.qualities and all(isinstance(q, int) and 1 <= q <= 100 for q in plan.qualities), \
            'invalid qualities. valid choices: integers 1 <= Q <= 100'
        assert all(a < b for a, b in zip(plan.qualities, plan.qualities[1:])), \
            'invalid qualities. Q values must be strictly increasing'
        # masking configs
        assert 'samr' not in plan.modes or plan.configs, \
            'invalid configs. samr mode requires at least one masking config'
        assert all(isinstance(c, int) and c in CONFIG_IDS for c in plan.configs), \
            f'invalid configs. valid choices: {", ".join(str(c) for c in CONFIG_IDS)}'
        # seed
        assert isinstance(plan.seed, int) and plan.seed >= 0, \
            'invalid seed. valid choices: integers >= 0'
        # reconstructor
        assert plan.reconstructor == 'harmonic' or \
            (plan.reconstructor.startswith('ext:') and plan.reconstructor[4:].strip()), \
            'invalid reconstructor. valid choices: `harmonic` (default) or `ext:<cmd>`'
        # mask side channel
        assert isinstance(plan.mask_side_channel, bool), \
            'invalid mask side channel argument. must be a bool'
        # corpus kind
        assert plan.corpus_kind in CORPUS_KINDS, \
            'invalid corpus kind. valid choices: `generic` (default) or `cityscapes`'
        # taxonomy
        assert plan.taxonomy is None or isinstance(plan.taxonomy, str), \
            'invalid taxonomy. must be a file path'
        # workers
        assert plan.jobs is None or (isinstance(plan.jobs, int) and plan.jobs >= 1), \
            'invalid number of jobs. valid choices: 1 <= `jobs`'
        # verbosity
        assert isinstance(plan.verbose, int), \
            'invalid verbosity. valid choices: 0 <= `verbose` (default: 0)'
        assert 0 <= plan.verbose, \
            'invalid verbosity. valid choices: 0 <= `verbose` (default: 0)'
