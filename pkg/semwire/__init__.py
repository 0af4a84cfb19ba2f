from .core import SemwireError, IoError, FormatError, LabelError, ContainerError, DimensionError, RleError, \
                  CodecError, ExternalError, CsvError, CorpusError, ConfigError, ConvergenceWarning, \
                  SemanticGroup, GROUPS, ClassTaxonomy, ImageBuffer, SegMap, Caption, \
                  load_image, load_segmap, save_image
from .container import PayloadContainer, Entry, Tags
from .edges import EdgeMap, to_grayscale, canny, edge_density
from .masking import PatchGrid, MaskConfig, PatchMask, dominant_class, semantic_mask, random_mask, \
                     sample_training_ratio, apply_mask, mask_to_rle, rle_to_mask
from .codec import Format, EncodedBlob, encode, decode, downsample_segmap, upsample_segmap
from .mmsd import MmsdOpts, MmsdPayload, mmsd_pack, pack_modalities, mmsd_unpack, export_modalities, \
                  reconstruct_external, compression_ratio, ratio_report
from .samr import SamrBitstream, Reconstructor, samr_encode, samr_decode, detect_mask, mask_f1, \
                  inpaint_harmonic, masked_l1
from .metrics import RdRecord, psnr, ssim, ms_ssim, bpp
from .plan import RdKeys, SweepPlan
from .results import info, fmt, write_csv, read_csv, summarize, matched_points
from .harness import discover_corpus, run_sweep, plot_rd, cityscapes_checks
