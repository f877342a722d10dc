"""Fully diverse spherical space-frequency codes for MIMO-OFDM.

The pipeline: points of a low-density lattice are wrapped onto a sphere,
mapped to the Stiefel manifold of unitary space-time frames, and spread
across OFDM subcarriers.  Decoding inverts the chain back to a lattice
closest-point search, with exhaustive maximum-likelihood as fallback.
"""

from .lattices import Lattice, LatticePoint, make_lattice
from .spherewrap import WrapParams, build_code, tune_code, unwrap_point, wrap_points
from .manifold import (
    sphere_exp_north,
    sphere_log_north,
    stiefel_exp,
    stiefel_log,
    tangent_transfer,
)
from .sfcode import (
    Codebook,
    OfdmParams,
    alamouti_codebook,
    load_codebook,
    save_codebook,
    spherical_codebook,
)
from .diversity import DiversityReport, codebook_report, pair_metrics
from .channel import sample_channel, transmit, trial_rng
from .decoder import DecoderContext, lattice_decode, ml_decode

__version__ = "0.1.0"

__all__ = [
    "Lattice",
    "LatticePoint",
    "make_lattice",
    "WrapParams",
    "wrap_points",
    "unwrap_point",
    "build_code",
    "tune_code",
    "sphere_exp_north",
    "sphere_log_north",
    "tangent_transfer",
    "stiefel_exp",
    "stiefel_log",
    "OfdmParams",
    "Codebook",
    "spherical_codebook",
    "alamouti_codebook",
    "save_codebook",
    "load_codebook",
    "DiversityReport",
    "pair_metrics",
    "codebook_report",
    "trial_rng",
    "sample_channel",
    "transmit",
    "DecoderContext",
    "ml_decode",
    "lattice_decode",
    "__version__",
]
