"""Channel quality to MCS / spectral efficiency and RB demand estimation.

DL quality is a CQI index (1..15) from the 4-bit CQI table of 3GPP
TS 36.213 Table 7.2.3-1.  UL quality is a mean SNR in dB, bucketed to the
same CQI scale with a standard SNR->CQI threshold ladder.
"""
from __future__ import annotations

import math

import numpy as np

PRB_TOTAL_10MHZ = 50

# bits per resource element, CQI 1..15 (index 0 unused)
CQI_EFFICIENCY = np.array([
    0.0, 0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766,
    1.9141, 2.4063, 2.7305, 3.3223, 3.9023, 4.5234, 5.1152, 5.5547,
])

# highest MCS index whose efficiency does not exceed the CQI's
CQI_TO_MCS = np.array([0, 0, 0, 2, 4, 6, 8, 11, 13, 15, 18, 20, 22, 24, 26, 28])
MAX_MCS = 28

# SNR (dB) at which CQI k becomes usable, k = 1..15
SNR_CQI_THRESHOLDS_DB = np.array([
    1.95, 4.0, 6.0, 8.0, 10.0, 11.95, 14.05, 16.0, 17.9, 19.9,
    21.5, 23.45, 25.0, 27.3, 29.0,
])

# data REs per PRB per 1 ms subframe after control/reference overhead
RE_PER_PRB = {"dl": 120, "ul": 144}


class InvalidContextError(ValueError):
    """Raised for channel-quality values outside the supported tables."""


def snr_to_cqi(snr_db: float) -> int:
    if not math.isfinite(snr_db):
        raise InvalidContextError(f"non-finite UL SNR {snr_db}")
    cqi = int(np.searchsorted(SNR_CQI_THRESHOLDS_DB, snr_db, side="right"))
    if cqi < 1:
        raise InvalidContextError(f"UL SNR {snr_db} dB below the lowest CQI bucket")
    return cqi


def channel_cqi(sigma: float, direction: str) -> int:
    """CQI bucket for a DL CQI report or an UL SNR."""
    if direction == "dl":
        if sigma != int(sigma) or not 1 <= sigma <= 15:
            raise InvalidContextError(f"DL CQI must be an integer in 1..15, got {sigma}")
        return int(sigma)
    if direction == "ul":
        return snr_to_cqi(float(sigma))
    raise ValueError(f"direction must be 'dl' or 'ul', got {direction!r}")


def mcs_index(sigma: float, direction: str) -> int:
    return int(CQI_TO_MCS[channel_cqi(sigma, direction)])


def rb_capacity_mbps(sigma: float, direction: str) -> float:
    """Throughput one PRB carries at the MCS the channel allows."""
    eff = CQI_EFFICIENCY[channel_cqi(sigma, direction)]
    return float(eff * RE_PER_PRB[direction] * 1e3 / 1e6)


def link_capacity_mbps(sigma: float, direction: str, prb_total: int = PRB_TOTAL_10MHZ) -> float:
    return rb_capacity_mbps(sigma, direction) * prb_total


def estimate_rbs(d: float, sigma: float, direction: str, prb_total: int = PRB_TOTAL_10MHZ) -> float:
    """Mean PRBs per subframe needed to carry ``d`` Mbps."""
    if d < 0 or not math.isfinite(d):
        raise InvalidContextError(f"demand must be finite and >= 0, got {d}")
    if prb_total <= 0:
        raise ValueError("prb_total must be positive")
    return min(float(prb_total), d / rb_capacity_mbps(sigma, direction))
