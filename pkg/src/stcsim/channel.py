"""Quasi-static Rayleigh channels and the real equivalent channel matrix.

The complex model Y = sqrt(rho) X H + Z (T x Nr observations) is flattened to
the real model y = sqrt(rho) H s + z, where column l of H applies the real
expansion of dispersion matrix l to the stacked channel vector, one block per
receive antenna.  Both forms agree exactly; the vector form is what the
QR-based decoders consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import DispersionCode, real_expansion
from .rng import as_generator


class ChannelError(ValueError):
    """Dimension mismatch between code and channel."""


@dataclass(frozen=True)
class SnrPoint:
    """Average SNR per receive antenna."""

    rho_db: float

    @property
    def rho(self) -> float:
        return 10.0 ** (self.rho_db / 10.0)

    @classmethod
    def from_linear(cls, rho: float) -> "SnrPoint":
        if rho <= 0:
            raise ValueError("linear SNR must be positive")
        return cls(rho_db=10.0 * np.log10(rho))


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of an Nt x Nr channel with i.i.d. CN(0,1) coefficients."""

    h: np.ndarray  # (Nt, Nr) complex

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        if h.ndim != 2:
            raise ChannelError("channel matrix must be Nt x Nr")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def nt(self) -> int:
        return int(self.h.shape[0])

    @property
    def nr(self) -> int:
        return int(self.h.shape[1])

    def stacked(self) -> np.ndarray:
        """Real vector of length 2*Nt*Nr: (Re h_m; Im h_m) per receive antenna m."""
        parts = []
        for m in range(self.nr):
            parts.append(self.h[:, m].real)
            parts.append(self.h[:, m].imag)
        return np.concatenate(parts)


def sample_channel(nt: int, nr: int, rng) -> ChannelRealization:
    """Draw i.i.d. CN(0,1) coefficients (real/imag parts of variance 1/2)."""
    if nt < 1 or nr < 1:
        raise ChannelError("need at least one antenna on each side")
    gen = as_generator(rng)
    h = gen.normal(0.0, np.sqrt(0.5), size=(nt, nr)) \
        + 1j * gen.normal(0.0, np.sqrt(0.5), size=(nt, nr))
    return ChannelRealization(h=h)


def equivalent_channel(code: DispersionCode, ch: ChannelRealization) -> np.ndarray:
    """Real 2*T*Nr x L matrix coupling the symbol vector to the stacked
    received vector.  Column l applies the (energy-scaled) real expansion of
    dispersion matrix l block-diagonally over receive antennas."""
    if code.nt != ch.nt:
        raise ChannelError(f"code has Nt={code.nt} but channel has Nt={ch.nt}")
    exps = code.expansions(scaled=True)          # (L, 2T, 2Nt)
    hbar = ch.stacked().reshape(ch.nr, 2 * ch.nt)  # per-antenna (Re; Im) stacks
    # blocks[m, l] = expansion_l @ hbar_m, laid out antenna-major in rows
    blocks = np.einsum("ltp,mp->mlt", exps, hbar)
    h = blocks.transpose(0, 2, 1).reshape(2 * code.t * ch.nr, code.l)
    return np.ascontiguousarray(h)


def simulate_transmission(code: DispersionCode, s, ch: ChannelRealization,
                          snr: SnrPoint, rng, noiseless: bool = False) -> np.ndarray:
    """Received vector y = sqrt(rho) H s + z with real noise components of
    variance 1/2 (i.e. complex noise CN(0,1)).  noiseless=True returns the
    exact noise-free vector."""
    s = np.asarray(s, dtype=float)
    if s.shape != (code.l,):
        raise ChannelError(f"symbol vector must have length {code.l}")
    h = equivalent_channel(code, ch)
    y = np.sqrt(snr.rho) * (h @ s)
    if not noiseless:
        gen = as_generator(rng)
        y = y + gen.normal(0.0, np.sqrt(0.5), size=y.shape)
    return y
