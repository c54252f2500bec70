"""Modified turbo equalization: post-filter, ISI trellis detector, FEC, loop."""

from .detector import TrellisSpec, bcjr_detect, build_trellis, gray_labels, map_demap_pam
from .equalizer import TurboEqualizer, effective_filter, turbo_equalize
from .fec import FecCodec, deinterleave, fec_bcjr_decode, fec_encode, interleave
from .postfilter import PostFilterWhitener, apply_post_filter, estimate_post_filter

__all__ = [
    "FecCodec", "PostFilterWhitener", "TrellisSpec", "TurboEqualizer", "apply_post_filter",
    "bcjr_detect", "build_trellis", "deinterleave", "effective_filter", "estimate_post_filter",
    "fec_bcjr_decode", "fec_encode", "gray_labels", "interleave", "map_demap_pam",
    "turbo_equalize",
]
