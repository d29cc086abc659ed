"""
Compression ratio and distortion metrics.

MSE in dB is the signal-normalized error, 10*log10(NMSE), so that SNR = -MSE.
"""

import json
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from errors import LengthMismatch, ZeroDenominator, ZeroReference


class Ratio(NamedTuple):
    ratio: float
    label: str


@dataclass(frozen=True)
class DistortionReport:
    nmse: float
    mse_db: float
    prd_pct: float
    snr_db: float

    @property
    def perfect(self):
        return self.nmse == 0.0

    def to_dict(self):
        return {key: _finite_or_marker(value) for key, value in asdict(self).items()}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _finite_or_marker(value):
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def compression_ratio(original_bytes, compressed_bytes):
    if compressed_bytes < 1:
        raise ZeroDenominator("compressed size must be at least one byte")
    ratio = original_bytes / compressed_bytes
    return Ratio(ratio, f"{ratio:.1f}:1")


def distortion(x, xhat):
    a = np.asarray(getattr(x, 'samples', x), dtype=np.float64)
    b = np.asarray(getattr(xhat, 'samples', xhat), dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.size} reference samples against {b.size} reconstructed")

    reference = float(np.dot(a, a))
    if reference == 0:
        raise ZeroReference("reference signal has zero energy")
    diff = a - b
    error = float(np.dot(diff, diff))

    nmse = error / reference
    if error == 0:
        return DistortionReport(0.0, -math.inf, 0.0, math.inf)
    mse_db = 10.0 * math.log10(nmse)
    return DistortionReport(nmse, mse_db, 100.0 * math.sqrt(nmse), -mse_db)
