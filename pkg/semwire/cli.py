#!/usr/bin/env python
# -*- coding: utf-8 -*

"""
command line interface
"""

__author__ = 'semwire developers'
__status__ = 'Development'

import os
import sys
import logging
import argparse
from typing import List, Optional

from .core import SemwireError, ConfigError, IoError, ClassTaxonomy, Caption, load_image, load_segmap, save_image
from .container import PayloadContainer
from .edges import CANNY_LOW, CANNY_HIGH, canny, to_grayscale, edge_density
from .masking import MaskConfig, PatchGrid, semantic_mask, random_mask, sample_training_ratio, apply_mask, mask_to_rle
from .mmsd import MmsdOpts, mmsd_pack, export_modalities, reconstruct_external, compression_ratio, MmsdPayload
from .samr import SamrBitstream, Reconstructor, samr_encode, samr_decode, DETECT_TAU
from .plan import SweepPlan, DEFAULT_QUALITIES, DEFAULT_CONFIGS
from .results import info, summarize, matched_points
from .harness import run_sweep, plot_rd
from .tools import Tee


def _ints(text: str) -> List[int]:
        try:
            return [int(t) for t in text.split(',') if t.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f'expected comma-separated integers, got {text!r}') from None


def _size(text: str) -> List[int]:
        try:
            w, h = (int(t) for t in text.lower().split('x'))
        except ValueError:
            raise argparse.ArgumentTypeError(f'expected WxH, got {text!r}') from None
        return [w, h]


def _taxonomy(args: argparse.Namespace) -> ClassTaxonomy:
        return ClassTaxonomy.from_file(args.taxonomy) if args.taxonomy else ClassTaxonomy.default()


def _mask_config(args: argparse.Namespace) -> MaskConfig:
        if args.config_file:
            return MaskConfig.from_file(args.config_file, id=args.config)
        return MaskConfig.preset(args.config)


def cmd_edges(args: argparse.Namespace) -> int:
        edges = canny(to_grayscale(load_image(args.image)), args.low, args.high)
        save_image(edges.to_image(), args.output)
        print(f'{args.output}: {edges.width}x{edges.height}, edge density {edge_density(edges):.4f}')
        return 0


def cmd_mask(args: argparse.Namespace) -> int:
        img = load_image(args.image)
        grid = PatchGrid.for_image(img)
        if args.random:
            rho = args.rho if args.rho is not None else sample_training_ratio(args.seed)
            mask = random_mask(grid, rho, args.seed)
        else:
            if not args.segmap:
                raise ConfigError('--segmap is required unless --random is given')
            mask = semantic_mask(load_segmap(args.segmap, _taxonomy(args)), _mask_config(args), grid, args.seed)
        save_image(apply_mask(img, mask), args.output)
        if args.rle:
            try:
                with open(args.rle, 'wb') as handle:
                    handle.write(mask_to_rle(mask))
            except OSError as err:
                raise IoError(f'cannot write {args.rle}: {err}') from err
        print(f'{args.output}: {mask.count} of {grid.size} patches masked (ratio {mask.ratio:.4f})')
        return 0


def cmd_mmsd_pack(args: argparse.Namespace) -> int:
        img = load_image(args.image)
        seg = load_segmap(args.segmap, _taxonomy(args))
        caption = Caption.from_file(args.caption) if args.caption else None
        opts = MmsdOpts(seg_w=args.seg_size[0], seg_h=args.seg_size[1], canny_low=args.low, canny_high=args.high, \
                        with_edges=not args.no_edges, with_caption=not args.no_caption, verbose=args.verbose)
        container = mmsd_pack(img, seg, caption, opts)
        nbytes = container.to_file(args.output)
        sizes = ', '.join(f'{tag} {n} B' for tag, n in container.entry_sizes().items())
        print(f'{args.output}: {nbytes} B ({sizes}), ratio {compression_ratio(args.image, container):.2f}x')
        return 0


def cmd_mmsd_unpack(args: argparse.Namespace) -> int:
        container = PayloadContainer.from_file(args.container)
        paths = export_modalities(container, args.dir, _taxonomy(args))
        for name, path in sorted(paths.items()):
            print(f'{name:8s} {path}')
        if args.reconstruct_cmd:
            payload = MmsdPayload.from_container(container)
            out = args.out or os.path.join(args.dir, 'reconstruction.png')
            reconstruct_external(paths, args.reconstruct_cmd, out, payload.width, payload.height)
            print(f'{"output":8s} {out}')
        return 0


def cmd_samr_encode(args: argparse.Namespace) -> int:
        img = load_image(args.image)
        seg = load_segmap(args.segmap, _taxonomy(args))
        bs = samr_encode(img, seg, _mask_config(args), args.quality, args.seed, \
                         with_mask_side_channel=args.mask_side_channel)
        nbytes = bs.to_container().to_file(args.output)
        print(f'{args.output}: {nbytes} B, {nbytes * 8. / (img.width * img.height):.4f} bpp')
        return 0


def cmd_samr_decode(args: argparse.Namespace) -> int:
        bs = SamrBitstream.from_container(PayloadContainer.from_file(args.container))
        rec = Reconstructor.parse(args.reconstructor, solver=args.solver)
        img = samr_decode(bs, rec, tau=args.tau)
        save_image(img, args.output)
        print(f'{args.output}: {img.width}x{img.height}')
        return 0


def cmd_rd_sweep(args: argparse.Namespace) -> int:
        plan = SweepPlan(args.corpus, out=args.output, modes=args.modes.split(','), qualities=args.qualities, \
                         configs=args.configs, seed=args.seed, reconstructor=args.reconstructor, \
                         mask_side_channel=args.mask_side_channel, corpus_kind=args.corpus_kind, \
                         taxonomy=args.taxonomy, jobs=args.jobs, verbose=args.verbose)
        try:
            os.makedirs(plan.out, exist_ok=True)
        except OSError as err:
            raise IoError(f'cannot create {plan.out}: {err}') from err
        with Tee(os.path.join(plan.out, 'semwire.log')):
            print(info(plan, workers=plan.workers()))
            outcome = run_sweep(plan)
            if not outcome.records.empty:
                print(summarize(outcome.records).to_string(index=False))
                if args.target_bpp:
                    print(f'\n operating points closest to {args.target_bpp} bpp:\n')
                    print(matched_points(outcome.records, args.target_bpp).to_string(index=False))
                if not args.no_plots:
                    for path in plot_rd(plan.csv_path):
                        print(f' chart: {path}')
            if outcome.reduced_scales:
                print(f'\n MS-SSIM on fewer scales for {len(outcome.reduced_scales)} images (see ms_ssim_scales.csv)')
            print(f'\n {outcome.images - len(outcome.failed)} of {outcome.images} images ok\n')
        return 0 if outcome.ok else 1


def cmd_plot_rd(args: argparse.Namespace) -> int:
        for path in plot_rd(args.csv, args.output, args.extra):
            print(path)
        return 0


def parser() -> argparse.ArgumentParser:
        """
        this function builds the argument parser of all subcommands
        """
        p = argparse.ArgumentParser(prog='semwire', description='semantic image compression toolkit')
        p.add_argument('-v', '--verbose', action='count', default=0, help='more log output (repeatable)')
        p.add_argument('--taxonomy', default=None, help='class taxonomy file (id,name,group lines)')
        sub = p.add_subparsers(dest='command', required=True)

        s = sub.add_parser('edges', help='canny edge map of an image')
        s.add_argument('image')
        s.add_argument('-o', '--output', required=True)
        s.add_argument('--low', type=float, default=CANNY_LOW)
        s.add_argument('--high', type=float, default=CANNY_HIGH)
        s.set_defaults(func=cmd_edges)

        s = sub.add_parser('mask', help='semantic or random patch masking of an image')
        s.add_argument('image')
        s.add_argument('--segmap')
        s.add_argument('--config', type=int, default=0)
        s.add_argument('--config-file', default=None, help='`Group: probability` lines')
        s.add_argument('--random', action='store_true', help='semantic-agnostic masking')
        s.add_argument('--rho', type=float, default=None, help='random masking ratio (default: drawn from U(0.1, 0.8))')
        s.add_argument('--seed', type=int, default=0)
        s.add_argument('--rle', default=None, help='also write the run-length mask')
        s.add_argument('-o', '--output', required=True)
        s.set_defaults(func=cmd_mask)

        s = sub.add_parser('mmsd-pack', help='pack label map, edge map and caption')
        s.add_argument('image')
        s.add_argument('--segmap', required=True)
        s.add_argument('--caption', default=None)
        s.add_argument('--seg-size', type=_size, default=[1024, 512], help='label map target WxH')
        s.add_argument('--low', type=float, default=CANNY_LOW)
        s.add_argument('--high', type=float, default=CANNY_HIGH)
        s.add_argument('--no-edges', action='store_true')
        s.add_argument('--no-caption', action='store_true')
        s.add_argument('-o', '--output', required=True)
        s.set_defaults(func=cmd_mmsd_pack)

        s = sub.add_parser('mmsd-unpack', help='export the modalities of an MMSD payload')
        s.add_argument('container')
        s.add_argument('-d', '--dir', required=True)
        s.add_argument('--reconstruct-cmd', default=None, help='"<cmd> {seg} {edge} {caption} {out}"')
        s.add_argument('--out', default=None)
        s.set_defaults(func=cmd_mmsd_unpack)

        s = sub.add_parser('samr-encode', help='semantic masking followed by JPEG encoding')
        s.add_argument('image')
        s.add_argument('--segmap', required=True)
        s.add_argument('--config', type=int, default=0)
        s.add_argument('--config-file', default=None)
        s.add_argument('--quality', type=int, required=True)
        s.add_argument('--seed', type=int, default=0)
        s.add_argument('--mask-side-channel', action='store_true')
        s.add_argument('-o', '--output', required=True)
        s.set_defaults(func=cmd_samr_encode)

        s = sub.add_parser('samr-decode', help='decode and reconstruct a SAMR bitstream')
        s.add_argument('container')
        s.add_argument('--reconstructor', default='harmonic', help='harmonic or ext:<cmd {input} {mask} {out}>')
        s.add_argument('--solver', default='gauss-seidel', choices=('gauss-seidel', 'direct'))
        s.add_argument('--tau', type=float, default=DETECT_TAU)
        s.add_argument('-o', '--output', required=True)
        s.set_defaults(func=cmd_samr_decode)

        s = sub.add_parser('rd-sweep', help='rate-distortion sweep over a corpus')
        s.add_argument('--corpus', required=True)
        s.add_argument('--modes', default='jpeg,samr', help='jpeg, samr, mmsd')
        s.add_argument('--configs', type=_ints, default=list(DEFAULT_CONFIGS))
        s.add_argument('--qualities', type=_ints, default=list(DEFAULT_QUALITIES))
        s.add_argument('--seed', type=int, default=0)
        s.add_argument('--reconstructor', default='harmonic')
        s.add_argument('--mask-side-channel', action='store_true')
        s.add_argument('--corpus-kind', default='generic', choices=('generic', 'cityscapes'))
        s.add_argument('--jobs', type=int, default=None, help='worker count (default: $SEMWIRE_JOBS or cpu count)')
        s.add_argument('--target-bpp', type=float, default=None, help='report matched operating points')
        s.add_argument('--no-plots', action='store_true')
        s.add_argument('-o', '--output', default='out')
        s.set_defaults(func=cmd_rd_sweep)

        s = sub.add_parser('plot-rd', help='rate-distortion charts from a sweep csv')
        s.add_argument('csv')
        s.add_argument('--extra', nargs='*', default=[], help='baseline csvs to overlay')
        s.add_argument('-o', '--output', default=None)
        s.set_defaults(func=cmd_plot_rd)
        return p


def main(argv: Optional[List[str]] = None) -> int:
        """
        main semwire program
        """
        args = parser().parse_args(argv)
        logging.basicConfig(level=max(logging.DEBUG, logging.WARNING - 10 * args.verbose), \
                            format='%(asctime)s %(levelname)s %(name)s: %(message)s')
        try:
            return args.func(args)
        except (SemwireError, AssertionError, ValueError) as err:
            print(f'semwire {args.command}: {err}', file=sys.stderr)
            return 2


if __name__ == '__main__':
    sys.exit(main())
