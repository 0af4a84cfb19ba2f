#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
harness module
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import os
import zlib
import logging
import numpy as np
import pandas as pd
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
from matplotlib import ticker
from concurrent.futures import ProcessPoolExecutor, as_completed
from scipy.stats import spearmanr
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .core import ClassTaxonomy, Caption, CorpusError, CsvError, IoError, caption_path, load_image, load_segmap
from .codec import Format, encode, decode
from .masking import MaskConfig, PatchGrid, semantic_mask
from .metrics import MS_WEIGHTS, RdRecord, psnr, ms_ssim
from .mmsd import MmsdOpts, mmsd_pack, ratio_report
from .plan import RdKeys, SweepPlan, JPEG_CONFIG, MMSD_CONFIG, sanity_check
from .results import fmt, write_csv, read_csv, summarize
from .samr import Reconstructor, samr_encode, samr_decode, detect_mask, mask_f1

logger = logging.getLogger(__name__)

IMAGE_EXTS = ('.png', '.jpg', '.jpeg')
LABEL_SUFFIXES = ('.labels.png', '_labelIds.png')
# cityscapes naming
CS_IMAGE = '_leftImg8bit'
CS_LABELS = '_gtFine_labelIds'
# share of failed images above which a sweep counts as failed
MAX_FAILURE_RATE = .1
RATIO_COLUMNS = ['image', 'orig_bytes', 'payload_bytes', 'ratio', 'seg_bytes', 'edg_bytes', \
                 'cap_bytes', 'met_bytes', 'overhead_bytes']


class CorpusItem(NamedTuple):
        id: str
        image: str
        segmap: str
        caption: Optional[str]


class Task(NamedTuple):
        item: CorpusItem
        mode: str
        config: Optional[int]
        qualities: Tuple[int, ...]
        seed: int
        reconstructor: str
        side_channel: bool
        taxonomy: Optional[str]


class TaskResult(NamedTuple):
        image: str
        records: List[RdRecord]
        ratio_row: Optional[Dict[str, object]]
        error: Optional[str]
        # MS-SSIM scales used for this image (None without MS-SSIM)
        scales: Optional[int] = None


class SweepOutcome(NamedTuple):
        records: pd.DataFrame
        images: int
        failed: List[str]
        # images whose MS-SSIM fell back to fewer scales
        reduced_scales: Dict[str, int]

        @property
        def failure_rate(self) -> float:
                return len(self.failed) / self.images if self.images else 0.

        @property
        def ok(self) -> bool:
                return self.failure_rate <= MAX_FAILURE_RATE


def _is_label_file(name: str) -> bool:
        return name.endswith(LABEL_SUFFIXES) or '_gtFine_' in name


def _find_segmap(path: str) -> Optional[str]:
        """
        label map candidates: <stem>.labels.png, <stem>_labelIds.png and the cityscapes
        gtFine counterpart (same directory or the parallel gtFine tree)
        """
        stem = os.path.splitext(path)[0]
        candidates = [stem + suffix for suffix in LABEL_SUFFIXES]
        if stem.endswith(CS_IMAGE):
            cs = stem[:-len(CS_IMAGE)] + CS_LABELS + '.png'
            candidates.append(cs)
            parts = cs.split(os.sep)
            if 'leftImg8bit' in parts:
                parts[len(parts) - 1 - parts[::-1].index('leftImg8bit')] = 'gtFine'
                candidates.append(os.sep.join(parts))
        for candidate in candidates:
            if os.path.isfile(candidate):
                return candidate
        return None


def discover_corpus(corpus: str) -> List[CorpusItem]:
        """
        this function lists the images of a corpus directory that come with a label map
        """
        if not os.path.isdir(corpus):
            raise CorpusError(f'corpus directory not found: {corpus}')
        items: List[CorpusItem] = []
        for root, dirs, files in os.walk(corpus):
            dirs.sort()
            for name in sorted(files):
                if not name.lower().endswith(IMAGE_EXTS) or _is_label_file(name):
                    continue
                path = os.path.join(root, name)
                segmap = _find_segmap(path)
                if segmap is None:
                    logger.warning('no label map for %s, skipped', path)
                    continue
                cap = caption_path(path)
                image_id = os.path.splitext(os.path.relpath(path, corpus))[0].replace(os.sep, '/')
                items.append(CorpusItem(image_id, path, segmap, cap if os.path.isfile(cap) else None))
        if not items:
            raise CorpusError(f'no images with label maps in {corpus}')
        return items


def image_seed(seed: int, image_id: str) -> int:
        """
        per-image seed that does not depend on corpus order
        """
        return (seed << 32) | zlib.crc32(image_id.encode('utf-8'))


def _taxonomy(path: Optional[str]) -> ClassTaxonomy:
        return ClassTaxonomy.default() if path is None else ClassTaxonomy.from_file(path)


def _run_task(task: Task) -> TaskResult:
        """
        worker: all remaining operating points of one (image, mode, config)
        """
        item = task.item
        try:
            img = load_image(item.image)
            records: List[RdRecord] = []
            ratio_row = None
            scales = None
            if task.mode == 'jpeg-only':
                for q in task.qualities:
                    blob = encode(img, Format.JPEG, q)
                    out = decode(blob)
                    score, scales = ms_ssim(out, img, return_scales=True)
                    records.append(RdRecord.make(item.id, task.mode, JPEG_CONFIG, q, blob.nbytes, \
                                                 img.width, img.height, psnr(out, img), score))
            elif task.mode == 'samr':
                seg = load_segmap(item.segmap, _taxonomy(task.taxonomy))
                config = MaskConfig.preset(task.config)
                rec = Reconstructor.parse(task.reconstructor)
                for q in task.qualities:
                    bs = samr_encode(img, seg, config, q, task.seed, with_mask_side_channel=task.side_channel)
                    out = samr_decode(bs, rec)
                    if not task.side_channel and logger.isEnabledFor(logging.DEBUG):
                        grid = PatchGrid.for_image(img)
                        f1 = mask_f1(detect_mask(decode(bs.blob), grid), semantic_mask(seg, config, grid, task.seed))
                        logger.debug('%s config %d Q %d: mask detection F1 %.4f', item.id, task.config, q, f1)
                    score, scales = ms_ssim(out, img, return_scales=True)
                    records.append(RdRecord.make(item.id, task.mode, task.config, q, bs.nbytes, \
                                                 img.width, img.height, psnr(out, img), score))
            else:
                if item.caption is None:
                    raise CorpusError(f'no caption sidecar for {item.image}')
                seg = load_segmap(item.segmap, _taxonomy(task.taxonomy))
                container = mmsd_pack(img, seg, Caption.from_file(item.caption), MmsdOpts())
                records.append(RdRecord.make(item.id, task.mode, MMSD_CONFIG, 0, container.total_bytes, \
                                             img.width, img.height, np.nan, np.nan))
                ratio_row = ratio_report([(item.id, item.image, container)]).iloc[0].to_dict()
            return TaskResult(item.id, records, ratio_row, None, scales)
        except Exception as err:
            return TaskResult(item.id, [], None, f'{type(err).__name__}: {err}')


def _plan_tasks(plan: SweepPlan, items: Sequence[CorpusItem], done: set) -> List[Task]:
        tasks: List[Task] = []
        for item in items:
            seed = image_seed(plan.seed, item.id)
            for mode in plan.modes:
                if mode == 'jpeg-only':
                    points = [(None, JPEG_CONFIG, plan.qualities)]
                elif mode == 'samr':
                    points = [(c, str(c), plan.qualities) for c in plan.configs]
                else:
                    points = [(None, MMSD_CONFIG, [0])]
                for config, label, qualities in points:
                    todo = tuple(q for q in qualities if (item.id, mode, label, q) not in done)
                    if todo:
                        tasks.append(Task(item, mode, config, todo, seed, plan.reconstructor, \
                                          plan.mask_side_channel, plan.taxonomy))
        return tasks


def _load_previous(path: str) -> pd.DataFrame:
        if os.path.isfile(path):
            return read_csv(path)
        return fmt([])


def run_sweep(plan: SweepPlan) -> SweepOutcome:
        """
        this function runs the rate-distortion sweep of a corpus; records already present in
        <out>/rd.csv are skipped, new records are merged and written sorted by key
        """
        # sanity check
        sanity_check(plan)

        items = discover_corpus(plan.corpus)
        try:
            os.makedirs(plan.out, exist_ok=True)
        except OSError as err:
            raise IoError(f'cannot create {plan.out}: {err}') from err

        previous = _load_previous(plan.csv_path)
        done = set(zip(*(previous[k] for k in RdKeys.key)))
        tasks = _plan_tasks(plan, items, done)
        workers = min(plan.workers(), max(1, len(tasks)))
        logger.info('%d images, %d tasks pending (%d records on disk), %d workers', \
                    len(items), len(tasks), len(previous), workers)

        results: List[TaskResult] = []
        if workers == 1:
            results = [_run_task(task) for task in tasks]
        else:
            with ProcessPoolExecutor(max_workers=workers) as executor:
                futures = {executor.submit(_run_task, task): task for task in tasks}
                for future in as_completed(futures):
                    results.append(future.result())

        failed = sorted({r.image for r in results if r.error is not None})
        for r in sorted(results, key=lambda r: r.image):
            if r.error is not None:
                logger.error('%s failed: %s', r.image, r.error)
        new = [rec for r in results if r.error is None and r.image not in failed for rec in r.records]

        records = previous
        if new:
            records = fmt(list(previous.itertuples(index=False, name=None)) + [tuple(rec) for rec in new])
            write_csv(records, plan.csv_path)
            logger.info('%d new records written to %s', len(new), plan.csv_path)
        else:
            logger.info('no new records, %s left untouched', plan.csv_path)

        ratio_rows = [r.ratio_row for r in results if r.ratio_row is not None and r.image not in failed]
        ratios = _merge_ratios(os.path.join(plan.out, 'mmsd_ratios.csv'), ratio_rows)
        if not records.empty:
            summarize(records).to_csv(os.path.join(plan.out, 'summary.csv'), index=False)
        if plan.corpus_kind == 'cityscapes':
            checks = cityscapes_checks(records, ratios)
            checks.to_csv(os.path.join(plan.out, 'cityscapes_checks.csv'), index=False)
            for row in checks.itertuples(index=False):
                logger.info('check %-24s %-8s value %s (target %s)', row.criterion, row.status, row.value, row.target)

        reduced = _write_reduced_scales(os.path.join(plan.out, 'ms_ssim_scales.csv'), results, failed)

        outcome = SweepOutcome(records, len(items), failed, reduced)
        if failed:
            logger.warning('%d of %d images failed (%.1f %%)', len(failed), len(items), 100. * outcome.failure_rate)
        return outcome


def _write_reduced_scales(path: str, results: Sequence[TaskResult], failed: Sequence[str]) -> Dict[str, int]:
        """
        images scored with fewer than 5 MS-SSIM scales are listed in <out>/ms_ssim_scales.csv
        """
        reduced = {r.image: r.scales for r in results \
                   if r.scales is not None and r.scales < MS_WEIGHTS.size and r.image not in failed}
        if reduced:
            for image, n in sorted(reduced.items()):
                logger.warning('%s: MS-SSIM computed on %d of %d scales', image, n, MS_WEIGHTS.size)
            pd.DataFrame(sorted(reduced.items()), columns=['image', 'ms_ssim_scales']).to_csv(path, index=False)
        return reduced


def _merge_ratios(path: str, rows: List[Dict[str, object]]) -> Optional[pd.DataFrame]:
        """
        merge new mmsd ratio rows into <out>/mmsd_ratios.csv (one row per image)
        """
        old = pd.read_csv(path, dtype={'image': str}) if os.path.isfile(path) else None
        if not rows:
            return old
        new = pd.DataFrame(rows, columns=RATIO_COLUMNS)
        merged = new if old is None else pd.concat([old[~old['image'].isin(new['image'])], new])
        merged = merged.sort_values('image', kind='mergesort').reset_index(drop=True)
        merged.to_csv(path, index=False)
        return merged


def _series_label(mode: str, config: str) -> str:
        if mode == 'jpeg-only':
            return 'JPEG'
        if mode == 'samr':
            return f'SAMR config {config}'
        return 'MMSD payload'


def plot_rd(csv: str, out_dir: Optional[str] = None, extra_csvs: Sequence[str] = ()) -> List[str]:
        """
        this function draws BPP vs PSNR, BPP vs MS-SSIM and BPP vs bytes charts (log-x),
        one series per mode and config, averaged over images; extra csvs are overlaid
        """
        frames = [('', read_csv(csv))]
        for extra in extra_csvs:
            frames.append((os.path.splitext(os.path.basename(extra))[0], read_csv(extra)))
        out_dir = out_dir or os.path.dirname(os.path.abspath(csv))
        series: List[Tuple[str, pd.DataFrame]] = []
        for tag, df in frames:
            summary = summarize(df)
            for (mode, config), points in summary.groupby([RdKeys.mode, RdKeys.config], sort=True):
                label = _series_label(mode, config)
                series.append((f'{label} ({tag})' if tag else label, points.sort_values(f'{RdKeys.bpp} (mean)')))
        if not series:
            raise CsvError(f'{csv}: no records to plot')

        paths = []
        for metric, ylabel, name in ((RdKeys.psnr, 'PSNR [dB]', 'rd_psnr.png'), \
                                     (RdKeys.ms_ssim, 'MS-SSIM', 'rd_ms_ssim.png'), \
                                     (RdKeys.nbytes, 'payload [bytes]', 'rd_bytes.png')):
            fig, ax = plt.subplots()
            ax.set(xlabel='bits per pixel', ylabel=ylabel)
            for label, points in series:
                x = points[f'{RdKeys.bpp} (mean)'].to_numpy()
                y = points[f'{metric} (mean)'].to_numpy()
                keep = np.isfinite(y) & (x > 0.)
                ax.semilogx(x[keep], y[keep], marker='o', markersize=3, label=label)
            ax.xaxis.set_minor_locator(ticker.LogLocator(subs=[1, 2, 3, 4, 5, 6, 7, 8, 9]))
            ax.grid(True, which='both', alpha=.3)
            ax.legend(fontsize='small')
            path = os.path.join(out_dir, name)
            fig.savefig(path, dpi=150, bbox_inches='tight')
            plt.close(fig)
            paths.append(path)
        return paths


def _check(criterion: str, value: float, target: str, passed: Optional[bool], reason: str = '') -> Dict[str, object]:
        if passed is None:
            status = f'skipped ({reason})' if reason else 'skipped'
        else:
            status = 'pass' if passed else 'fail'
        return {'criterion': criterion, 'value': value, 'target': target, 'status': status}


def cityscapes_checks(df: pd.DataFrame, ratios: Optional[pd.DataFrame] = None, min_images: int = 5) -> pd.DataFrame:
        """
        this function evaluates the dataset-level targets of a Cityscapes sample: bitrate
        ordering of masking configs at Q=5, the JPEG Q=5 anchor, MMSD payload sizes and the
        monotonicity of JPEG size in Q
        """
        rows = []

        def mean_at(mode: str, config: str, q: int, column: str) -> Tuple[float, int]:
            sel = df[(df[RdKeys.mode] == mode) & (df[RdKeys.config] == config) & (df[RdKeys.quality] == q)]
            return (float(sel[column].mean()) if len(sel) else np.nan), sel[RdKeys.image].nunique()

        # bitrate ordering
        bpp_0, n_0 = mean_at('samr', '0', 5, RdKeys.bpp)
        bpp_7, n_7 = mean_at('samr', '7', 5, RdKeys.bpp)
        few = 'fewer than {:d} images'.format(min_images)
        for name, value, n, lo, hi in (('samr_q5_config0_bpp', bpp_0, n_0, .05, .13), \
                                       ('samr_q5_config7_bpp', bpp_7, n_7, .03, .10)):
            ok = None if n < min_images else bool(lo <= value <= hi)
            rows.append(_check(name, value, f'[{lo}, {hi}]', ok, few if n else 'no records'))
        ok = None if min(n_0, n_7) < min_images else bool(bpp_0 > bpp_7)
        rows.append(_check('samr_q5_bpp_order', bpp_0 - bpp_7, '> 0', ok, few if min(n_0, n_7) else 'no records'))

        # jpeg anchor
        psnr_5, n_j = mean_at('jpeg-only', JPEG_CONFIG, 5, RdKeys.psnr)
        ssim_5, _ = mean_at('jpeg-only', JPEG_CONFIG, 5, RdKeys.ms_ssim)
        reason = few if n_j else 'no records'
        rows.append(_check('jpeg_q5_psnr_db', psnr_5, '27.62 +- 2.5', \
                           None if n_j < min_images else bool(abs(psnr_5 - 27.62) <= 2.5), reason))
        rows.append(_check('jpeg_q5_ms_ssim', ssim_5, '0.864 +- 0.05', \
                           None if n_j < min_images else bool(abs(ssim_5 - .864) <= .05), reason))

        # mmsd payload accounting
        n_r = 0 if ratios is None else len(ratios)
        reason = few if n_r else 'no mmsd records'
        for name, value, target, test in \
                (('mmsd_seg_kb', lambda r: r['seg_bytes'].mean() / 1024., '[2, 8]', lambda v: 2. <= v <= 8.), \
                 ('mmsd_edge_kb', lambda r: r['edg_bytes'].mean() / 1024., '[8, 35]', lambda v: 8. <= v <= 35.), \
                 ('mmsd_mean_ratio', lambda r: r['ratio'].mean(), '>= 80', lambda v: v >= 80.)):
            v = float(value(ratios)) if n_r else np.nan
            rows.append(_check(name, v, target, None if n_r < min_images else bool(test(v)), reason))

        # jpeg size monotone in Q
        jpeg = df[df[RdKeys.mode] == 'jpeg-only']
        corrs = [spearmanr(g[RdKeys.quality], g[RdKeys.nbytes])[0] for _, g in jpeg.groupby(RdKeys.image) if len(g) > 2]
        rows.append(_check('jpeg_bytes_rank_corr', float(np.min(corrs)) if corrs else np.nan, '>= 0.95', \
                           bool(np.min(corrs) >= .95) if corrs else None, 'fewer than 3 quality factors'))
        return pd.DataFrame(rows, columns=['criterion', 'value', 'target', 'status'])
