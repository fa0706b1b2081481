"""Rate-compatible protograph LDPC codes at 1k information bits.

Design analysis (PEXIT thresholds), two-stage QC lifting, encoding,
sum-product decoding and Monte Carlo evaluation for a 15-member family
extending the rate-4/5 AR4JA protograph down to rate 1/3.
"""

__version__ = "0.1.0"

from .protomatrix import (Protomatrix, RcFamily, embedded_family, member, rate,
                          validate_family)
from .analysis import (capacity_limit, j_function, j_inverse, pexit_converges,
                       pexit_threshold)
from .construction import QcCode, circulant_lift, girth, member_code, peg_expand
from .codec import DecodeResult, Encoder, SumProductDecoder, decode, encode, transmit_select
from .simulation import ChannelSpec, SimRecord, StopRule, awgn_llr, run_campaign, run_point

__all__ = [
    "Protomatrix", "RcFamily", "embedded_family", "member", "rate", "validate_family",
    "capacity_limit", "j_function", "j_inverse", "pexit_converges", "pexit_threshold",
    "QcCode", "circulant_lift", "girth", "member_code", "peg_expand",
    "DecodeResult", "Encoder", "SumProductDecoder", "decode", "encode", "transmit_select",
    "ChannelSpec", "SimRecord", "StopRule", "awgn_llr", "run_campaign", "run_point",
]
