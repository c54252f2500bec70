"""FTN-16QAM vs PCS-64QAM coherent link simulator.

Submodules: sigkit (signal types and DSP primitives), shaping (MB/IvMB,
CCDM, PAS), txchain (constellations, pulse shaping, framing), channel
(impairments), rxfront (FOE, CDC, sync), ptprdfe (phase-tracking PR DFE),
turbo (post-filter, BCJR detector, FEC, turbo loop) and harness (trials,
sweeps, CSV).
"""

from .channel import NOISE_FREE, ChannelConfig, apply_channel
from .exceptions import (ComplexityError, ConfigurationError, DecodeError, EstimationFailedError,
                         FtnLinkError, ParameterError, SyncFailedError, TrainingFailedError)
from .harness import (LinkConfig, MetricsRecord, aggregate, compare_margins, ftn_config,
                      margin_at_ber, pcs_config, run_trial, sweep)
from .ptprdfe import PTPRDFE, PrTarget, pr_expand
from .shaping import ShapingSpec, solve_ivmb, solve_mb
from .sigkit import ComplexFrame, FirFilter, design_rrc, occupied_bandwidth, resample
from .turbo import PostFilterWhitener, TurboEqualizer
from .txchain import Constellation, pcs_constellation, qam_constellation

__version__ = "0.1.0"

__all__ = [
    "NOISE_FREE", "PTPRDFE", "PostFilterWhitener", "TurboEqualizer", "aggregate",
    "compare_margins", "ChannelConfig", "ComplexFrame", "ComplexityError",
    "ConfigurationError", "Constellation", "DecodeError", "EstimationFailedError", "FirFilter",
    "FtnLinkError", "LinkConfig", "MetricsRecord", "ParameterError", "PrTarget", "ShapingSpec",
    "SyncFailedError", "TrainingFailedError", "apply_channel", "design_rrc", "ftn_config",
    "margin_at_ber", "occupied_bandwidth", "pcs_config", "pcs_constellation", "pr_expand",
    "qam_constellation", "resample", "run_trial", "solve_ivmb", "solve_mb", "sweep",
]
