"""Real-input Fourier transforms, single-bin synthesis and band masking.

Conventions: the forward transform is unnormalized, the inverse carries
the 1/n factor, and only the n/2 + 1 non-negative bins of a length-n real
series are stored. The inverse takes the real part after Hermitian
completion, so spectra whose DC or Nyquist bins picked up imaginary parts
(a complex transfer function does that) still map to real series.

The DC bin belongs to the low band, so zeroing the low band also removes
the series mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import PartitionError, ShapeError
from .numerics import ComplexTensor

BAND_NAMES = ("low", "mid", "high")


@dataclass(frozen=True)
class Spectrum:
    """The K = n/2 + 1 stored Fourier bins of a real length-n series.

    ``coeffs`` has shape (..., K, F): bins on axis -2, features on -1.
    """

    coeffs: ComplexTensor
    n: int

    def __post_init__(self):
        if len(self.coeffs.shape) < 2:
            raise ShapeError(f"coeffs need (K, F), got {self.coeffs.shape}")
        numerics.check_even(self.n)
        if self.coeffs.shape[-2] != self.bins:
            raise ShapeError(
                f"length {self.n} needs {self.bins} bins, got "
                f"{self.coeffs.shape[-2]}"
            )

    @property
    def bins(self) -> int:
        return self.n // 2 + 1

    @classmethod
    def from_complex(cls, z, n: int) -> Spectrum:
        return cls(ComplexTensor.from_complex(z), n)

    def to_complex(self) -> np.ndarray:
        return self.coeffs.to_complex()


@dataclass(frozen=True)
class BandSpec:
    """Half-open run of bins ``[lo, hi)``."""

    lo: int
    hi: int

    def validate(self, bins: int) -> None:
        if not 0 <= self.lo < self.hi <= bins:
            raise PartitionError(
                f"band [{self.lo}, {self.hi}) does not fit {bins} bins"
            )

    def __len__(self) -> int:
        return self.hi - self.lo


def rdft(x) -> Spectrum:
    """Forward real DFT along the time axis (-2) of ``x``."""
    x = np.asarray(x)
    if x.ndim < 2:
        raise ShapeError(f"expected (n, F) series, got shape {x.shape}")
    return Spectrum.from_complex(numerics.rdft(x).value, x.shape[-2])


def irdft(s: Spectrum) -> np.ndarray:
    """Inverse real DFT: back to an (..., n, F) real array."""
    return numerics.irdft(s.to_complex(), s.n).value


def single_bin_inverse(s: Spectrum, m: int) -> np.ndarray:
    """Time-domain contribution of bin ``m`` alone.

    Closed form of ``irdft`` on a copy of ``s`` with every other bin
    zeroed: ``(w_m / n) * (a cos(2 pi m t / n) - b sin(2 pi m t / n))``
    where ``c_m = a + ib`` and ``w_m`` is the Hermitian completion weight.
    """
    if not 0 <= m < s.bins:
        raise PartitionError(f"bin {m} outside [0, {s.bins})")
    t = np.arange(s.n)
    angle = 2.0 * np.pi * m * t / s.n
    w = numerics.hermitian_weights(s.n)[m] / s.n
    a = s.coeffs.re[..., m : m + 1, :]
    b = s.coeffs.im[..., m : m + 1, :]
    return w * (a * np.cos(angle)[:, None] - b * np.sin(angle)[:, None])


def decouple(s: Spectrum, m: int) -> Spectrum:
    """Copy of ``s`` with every bin except ``m`` zeroed."""
    if not 0 <= m < s.bins:
        raise PartitionError(f"bin {m} outside [0, {s.bins})")
    z = np.zeros_like(s.to_complex())
    z[..., m, :] = s.to_complex()[..., m, :]
    return Spectrum.from_complex(z, s.n)


def band_partition(bins: int) -> tuple[BandSpec, BandSpec, BandSpec]:
    """Split ``bins`` into low / mid / high thirds; leftovers go high."""
    if bins < 3:
        raise PartitionError(f"need at least 3 bins to partition, got {bins}")
    third = bins // 3
    return (
        BandSpec(0, third),
        BandSpec(third, 2 * third),
        BandSpec(2 * third, bins),
    )


def named_band(name: str, bins: int) -> BandSpec:
    """Look up ``low``/``mid``/``high`` in :func:`band_partition`."""
    try:
        return band_partition(bins)[BAND_NAMES.index(name)]
    except ValueError:
        raise PartitionError(
            f"unknown band {name!r}; expected one of {BAND_NAMES}"
        ) from None


def band_zero(s: Spectrum, band: BandSpec) -> Spectrum:
    """Copy of ``s`` with bins ``[band.lo, band.hi)`` set to zero."""
    band.validate(s.bins)
    re = np.array(s.coeffs.re, copy=True)
    im = np.array(s.coeffs.im, copy=True)
    re[..., band.lo : band.hi, :] = 0.0
    im[..., band.lo : band.hi, :] = 0.0
    return Spectrum(ComplexTensor(re, im), s.n)


def band_energy(s: Spectrum, band: BandSpec) -> float:
    """Sum of squared magnitudes over the bins of ``band``."""
    band.validate(s.bins)
    z = s.to_complex()[..., band.lo : band.hi, :]
    return float(np.sum(np.abs(z) ** 2))
