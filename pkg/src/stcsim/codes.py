"""Linear-dispersion space-time codes, PAM constellations, and the built-in library.

A code maps L real information symbols to a T x Nt complex codeword
X = energy_scale * sum_l s_l C_l, where the C_l are fixed dispersion
matrices.  Complex symbols are always carried as two independent real
symbols (in-phase / quadrature), so L counts real dimensions throughout.

Conventions:
  * PAM levels are {+-1, +-3, ...} scaled to average energy 1/2 per real
    dimension, so one complex symbol has unit energy.
  * energy_scale is chosen per code so that E||X||^2 = T with unit-energy
    symbols, keeping constellation and code normalization independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: Relative singular-value threshold below which numeric rank drops.
RANK_TOL = 1e-9


class CodeError(ValueError):
    """Malformed code definition or code file."""


def real_expansion(c: np.ndarray) -> np.ndarray:
    """Real 2T x 2Nt representation [[Re C, -Im C], [Im C, Re C]] of a complex
    T x Nt matrix, i.e. complex multiplication written over the reals."""
    c = np.asarray(c, dtype=complex)
    if c.ndim != 2:
        raise CodeError("expected a 2-D matrix")
    re, im = c.real, c.imag
    return np.block([[re, -im], [im, re]])


def _gray(i: int) -> int:
    return i ^ (i >> 1)


def _gray_inverse(g: int) -> int:
    i = g
    shift = 1
    while (g >> shift) > 0:
        i ^= g >> shift
        shift += 1
    return i


@dataclass(frozen=True)
class Constellation:
    """Real M-ary PAM alphabet with Gray-coded bit labels.

    levels are strictly increasing, zero mean, and have average energy 1/2
    per real dimension.
    """

    m: int
    levels: np.ndarray

    @classmethod
    def pam(cls, m: int) -> "Constellation":
        if m < 2 or (m & (m - 1)) != 0:
            raise CodeError(f"constellation size must be a power of two >= 2, got {m}")
        raw = np.arange(-(m - 1), m, 2, dtype=float)
        levels = raw * math.sqrt(3.0 / (2.0 * (m * m - 1)))
        levels.setflags(write=False)
        return cls(m=m, levels=levels)

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.m)))

    def bits_of_index(self, index: int) -> tuple[int, ...]:
        """Gray label of the level at `index` (ascending order), MSB first."""
        g = _gray(index)
        b = self.bits_per_symbol
        return tuple((g >> (b - 1 - i)) & 1 for i in range(b))

    def index_of_bits(self, bits) -> int:
        g = 0
        for bit in bits:
            g = (g << 1) | (bit & 1)
        return _gray_inverse(g)

    def bit_map(self) -> dict:
        """Full mapping from bit tuples to amplitude levels."""
        return {self.bits_of_index(i): float(self.levels[i]) for i in range(self.m)}

    def bit_errors(self, idx_a: np.ndarray, idx_b: np.ndarray) -> int:
        """Hamming distance between the Gray labels of two index arrays."""
        a = np.asarray(idx_a, dtype=np.int64)
        b = np.asarray(idx_b, dtype=np.int64)
        x = (a ^ (a >> 1)) ^ (b ^ (b >> 1))
        count = 0
        while np.any(x):
            count += int(np.sum(x & 1))
            x >>= 1
        return count


@dataclass(frozen=True)
class DispersionCode:
    """An ordered set of L complex T x Nt dispersion matrices plus an energy scale."""

    name: str
    t: int
    nt: int
    dispersion: np.ndarray  # (L, T, Nt) complex
    energy_scale: float

    def __post_init__(self):
        d = np.ascontiguousarray(np.asarray(self.dispersion, dtype=complex))
        if d.ndim != 3 or d.shape[1] != self.t or d.shape[2] != self.nt:
            raise CodeError(
                f"dispersion array of {self.name} must be (L, {self.t}, {self.nt}), got {d.shape}"
            )
        if d.shape[0] == 0:
            raise CodeError("a code needs at least one dispersion matrix")
        if self.t < 1 or self.nt < 1:
            raise CodeError("T and Nt must be positive")
        if not np.all(np.isfinite(d)):
            raise CodeError(f"non-finite dispersion entries in {self.name}")
        if not (self.energy_scale > 0 and math.isfinite(self.energy_scale)):
            raise CodeError("energy_scale must be positive and finite")
        d.setflags(write=False)
        object.__setattr__(self, "dispersion", d)

    @classmethod
    def from_matrices(cls, name: str, matrices, t=None, nt=None, normalize=True,
                      energy_scale=1.0) -> "DispersionCode":
        """Build a code from a list of T x Nt matrices.  With normalize=True the
        energy scale is set so that E||X||^2 = T for unit-average-energy symbols."""
        d = np.asarray(matrices, dtype=complex)
        if d.ndim != 3:
            raise CodeError("expected a list of equally sized matrices")
        t = d.shape[1] if t is None else t
        nt = d.shape[2] if nt is None else nt
        scale = energy_scale
        if normalize:
            total = float(np.sum(np.abs(d) ** 2))
            if total <= 0:
                raise CodeError("cannot normalize an all-zero dispersion set")
            # E s^2 = 1/2 per real symbol, so E||X||^2 = scale^2 * total / 2.
            scale = math.sqrt(2.0 * t / total)
        return cls(name=name, t=t, nt=nt, dispersion=d, energy_scale=scale)

    @property
    def l(self) -> int:
        return int(self.dispersion.shape[0])

    @property
    def rate(self) -> float:
        return self.l / (2.0 * self.t)

    def scaled_dispersion(self) -> np.ndarray:
        return self.energy_scale * self.dispersion

    def expansions(self, scaled: bool = True) -> np.ndarray:
        """Real expansions of every dispersion matrix, shape (L, 2T, 2Nt).
        Cached: codes are immutable and this sits in the per-trial hot path."""
        attr = "_exps_scaled" if scaled else "_exps_raw"
        cached = getattr(self, attr, None)
        if cached is None:
            src = self.scaled_dispersion() if scaled else self.dispersion
            cached = np.stack([real_expansion(c) for c in src])
            cached.setflags(write=False)
            object.__setattr__(self, attr, cached)
        return cached

    def renamed(self, name: str) -> "DispersionCode":
        return DispersionCode(name, self.t, self.nt, self.dispersion, self.energy_scale)


def assemble_codeword(code: DispersionCode, s) -> np.ndarray:
    """Codeword X = energy_scale * sum_l s_l C_l for a real symbol vector s."""
    s = np.asarray(s, dtype=float)
    if s.shape != (code.l,):
        raise CodeError(f"symbol vector must have length {code.l}, got {s.shape}")
    return code.energy_scale * np.tensordot(s, code.dispersion, axes=1)


@dataclass(frozen=True)
class CodeValidation:
    """Outcome of the legality checks on a code bound to Nr receive antennas."""

    rate: float
    rank: int
    rate_bound_ok: bool      # rate <= min(Nt, Nr)
    tall_ok: bool            # L <= 2 T Nr, needed for rank(H) = L
    independent_ok: bool     # stacked real expansions have rank L
    energy_ok: bool          # E||X||^2 = T with unit-energy symbols
    energy_ratio: float

    @property
    def ok(self) -> bool:
        return (self.rate_bound_ok and self.tall_ok and self.independent_ok
                and self.energy_ok)

    def issues(self) -> list[str]:
        out = []
        if not self.rate_bound_ok:
            out.append("code rate exceeds min(Nt, Nr)")
        if not self.tall_ok:
            out.append("L > 2*T*Nr: equivalent channel cannot be full column rank")
        if not self.independent_ok:
            out.append("real-expanded dispersion matrices are linearly dependent")
        if not self.energy_ok:
            out.append("average codeword energy differs from T")
        return out


def stacked_expansion_matrix(code: DispersionCode) -> np.ndarray:
    """(L, 4*T*Nt) matrix whose rows are the flattened real expansions."""
    return code.expansions(scaled=False).reshape(code.l, -1)


def validate_code(code: DispersionCode, nr: int) -> CodeValidation:
    """Check rate bound, tallness, real-linear independence, and energy
    normalization.  Failures are reported, not raised."""
    stacked = stacked_expansion_matrix(code)
    sv = np.linalg.svd(stacked, compute_uv=False)
    rank = int(np.sum(sv > RANK_TOL * sv[0])) if sv.size else 0
    energy = code.energy_scale ** 2 * float(np.sum(np.abs(code.dispersion) ** 2)) / 2.0
    ratio = energy / code.t
    return CodeValidation(
        rate=code.rate,
        rank=rank,
        rate_bound_ok=code.rate <= min(code.nt, nr) + 1e-12,
        tall_ok=code.l <= 2 * code.t * nr,
        independent_ok=rank == code.l,
        energy_ok=abs(ratio - 1.0) < 1e-9,
        energy_ratio=ratio,
    )


# ---------------------------------------------------------------------------
# Code files
# ---------------------------------------------------------------------------

def save_code(code: DispersionCode, path) -> None:
    """Write a code as JSON: matrices row-major, entries as [re, im] pairs."""
    doc = {
        "name": code.name,
        "T": code.t,
        "Nt": code.nt,
        "L": code.l,
        "energy_scale": code.energy_scale,
        "dispersion": [
            [[float(z.real), float(z.imag)] for z in mat.ravel(order="C")]
            for mat in code.dispersion
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_code(path) -> DispersionCode:
    """Load a code file written by save_code.  Round trips are bit exact."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CodeError(f"cannot read code file {path}: {exc}") from exc
    try:
        name = str(doc["name"])
        t, nt, l = int(doc["T"]), int(doc["Nt"]), int(doc["L"])
        scale = float(doc["energy_scale"])
        raw = doc["dispersion"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CodeError(f"missing or malformed field in code file: {exc}") from exc
    if t < 1 or nt < 1:
        raise CodeError(f"illegal dimensions T={t}, Nt={nt}")
    if len(raw) != l:
        raise CodeError(f"file declares L={l} but contains {len(raw)} matrices")
    mats = np.empty((l, t, nt), dtype=complex)
    for i, flat in enumerate(raw):
        if len(flat) != t * nt:
            raise CodeError(f"matrix {i} has {len(flat)} entries, expected {t * nt}")
        vals = np.array([complex(re, im) for re, im in flat])
        mats[i] = vals.reshape(t, nt)
    if not np.all(np.isfinite(mats)):
        raise CodeError("non-finite entries in code file")
    return DispersionCode(name=name, t=t, nt=nt, dispersion=mats, energy_scale=scale)


# ---------------------------------------------------------------------------
# Built-in library
# ---------------------------------------------------------------------------

def alamouti_matrices() -> np.ndarray:
    """The four 2x2 dispersion matrices of the Alamouti code (real symbols)."""
    j = 1j
    return np.array([
        [[1, 0], [0, 1]],
        [[j, 0], [0, -j]],
        [[0, 1], [-1, 0]],
        [[0, j], [j, 0]],
    ], dtype=complex)


def alamouti() -> DispersionCode:
    return DispersionCode.from_matrices("alamouti", alamouti_matrices())


def blast(nt: int) -> DispersionCode:
    """Spatial multiplexing over one symbol duration: symbol 2n-1 / 2n are the
    in-phase / quadrature parts sent on antenna n."""
    if nt < 1:
        raise CodeError("blast needs nt >= 1")
    mats = np.zeros((2 * nt, 1, nt), dtype=complex)
    for n in range(nt):
        mats[2 * n, 0, n] = 1.0
        mats[2 * n + 1, 0, n] = 1j
    return DispersionCode.from_matrices(f"blast({nt})", mats)


def dsttd() -> DispersionCode:
    """Double space-time transmit diversity: two Alamouti blocks side by side
    on antennas (1,2) and (3,4) over T=2."""
    alam = alamouti_matrices()
    mats = np.zeros((8, 2, 4), dtype=complex)
    for i in range(4):
        mats[i, :, 0:2] = alam[i]
        mats[4 + i, :, 2:4] = alam[i]
    return DispersionCode.from_matrices("dsttd", mats)


def golden() -> DispersionCode:
    """Rate-2 algebraic code for two antennas built on the golden number.

    Real symbols are ordered as (re, im) pairs of the four complex symbols, so
    each pair shares a complex dispersion matrix C and j*C.
    """
    theta = (1 + math.sqrt(5)) / 2
    theta_bar = (1 - math.sqrt(5)) / 2
    alpha = 1 + 1j * (1 - theta)
    alpha_bar = 1 + 1j * (1 - theta_bar)
    s5 = math.sqrt(5)
    c_complex = [
        np.array([[alpha, 0], [0, alpha_bar]]) / s5,
        np.array([[alpha * theta, 0], [0, alpha_bar * theta_bar]]) / s5,
        np.array([[0, alpha], [1j * alpha_bar, 0]]) / s5,
        np.array([[0, alpha * theta], [1j * alpha_bar * theta_bar, 0]]) / s5,
    ]
    mats = []
    for c in c_complex:
        mats.append(c)
        mats.append(1j * c)
    return DispersionCode.from_matrices("golden", np.array(mats))


def jabba_seed() -> DispersionCode:
    """Rate-1 quasi-orthogonal seed code for four antennas over T=4 with eight
    real symbols; its symbol quadruples {s1..s4} and {s5..s8} are orthogonal
    groups, which is what the rate-Nt extension construction needs."""
    j = 1j
    z = np.zeros((4, 4), dtype=complex)

    def mat(entries):
        m = z.copy()
        for (r, c), v in entries.items():
            m[r, c] = v
        return m

    mats = np.array([
        mat({(0, 0): 1, (1, 1): 1, (2, 2): 1, (3, 3): 1}),        # s1
        mat({(0, 0): j, (1, 1): -j, (2, 2): j, (3, 3): -j}),      # s2
        mat({(0, 1): 1, (1, 0): -1, (2, 3): 1, (3, 2): -1}),      # s3
        mat({(0, 1): j, (1, 0): j, (2, 3): j, (3, 2): j}),        # s4
        mat({(0, 2): j, (1, 3): j, (2, 0): 1, (3, 1): 1}),        # s5
        mat({(0, 2): -1, (1, 3): 1, (2, 0): j, (3, 1): -j}),      # s6
        mat({(0, 3): j, (1, 2): -j, (2, 1): 1, (3, 0): -1}),      # s7
        mat({(0, 3): -1, (1, 2): -1, (2, 1): j, (3, 0): j}),      # s8
    ])
    return DispersionCode.from_matrices("jabba_seed", mats)


def ostbc_half_rate_5tx() -> DispersionCode:
    """Rate-1/2 real orthogonal design for five antennas over T=8."""
    rows = [
        [(1, 1), (2, 1), (3, 1), (4, 1), (5, 1)],
        [(2, -1), (1, 1), (4, 1), (3, -1), (6, 1)],
        [(3, -1), (4, -1), (1, 1), (2, 1), (7, 1)],
        [(4, -1), (3, 1), (2, -1), (1, 1), (8, 1)],
        [(5, -1), (6, -1), (7, -1), (8, -1), (1, 1)],
        [(6, -1), (5, 1), (8, -1), (7, 1), (2, -1)],
        [(7, -1), (8, 1), (5, 1), (6, -1), (3, -1)],
        [(8, -1), (7, -1), (6, 1), (5, 1), (4, -1)],
    ]
    mats = np.zeros((8, 8, 5), dtype=complex)
    for r, row in enumerate(rows):
        for c, (sym, sign) in enumerate(row):
            mats[sym - 1, r, c] = sign
    return DispersionCode.from_matrices("ostbc_half_rate_5tx", mats)


_PLAIN_LIBRARY = {
    "alamouti": alamouti,
    "dsttd": dsttd,
    "golden": golden,
    "jabba_seed": jabba_seed,
    "ostbc_half_rate_5tx": ostbc_half_rate_5tx,
}


def library_names() -> list[str]:
    return sorted(_PLAIN_LIBRARY) + [
        "blast(Nt)", "rate4_4tx", "rate5_5tx", "scalable(m,n)",
        "rate2_4tx", "rate2_4tx(theta)",
    ]


def library_code(name: str, *params) -> DispersionCode:
    """Fetch a built-in code by name.  Parameterized entries: blast(Nt),
    scalable(m, n), rate2_4tx(theta)."""
    key = name.strip().lower()
    if key in _PLAIN_LIBRARY:
        return _PLAIN_LIBRARY[key]()
    # Constructed codes live in the constructions module; import lazily to
    # avoid a cycle.
    from . import constructions

    if key == "blast":
        return blast(int(params[0]))
    if key == "rate4_4tx":
        return constructions.rate4_4tx()
    if key == "rate5_5tx":
        return constructions.rate5_5tx()
    if key == "scalable":
        return constructions.scalable_code(int(params[0]), int(params[1]))
    if key == "rate2_4tx":
        theta = float(params[0]) if params else None
        return constructions.optimized_rate2(constructions.rate2_coefficients(theta)
                                             if theta is not None else None)
    raise CodeError(f"unknown library code: {name!r}")


def resolve_code(text: str) -> DispersionCode:
    """Turn a CLI code reference into a code: a library name, optionally with
    parameters like 'blast(4)' or 'xi2m(2,1)', or a path to a code file."""
    text = text.strip()
    candidate = Path(text)
    if candidate.suffix == ".json" or candidate.is_file():
        return load_code(candidate)
    if "(" in text and text.endswith(")"):
        base, _, arg_str = text.partition("(")
        args = [a for a in arg_str[:-1].split(",") if a.strip()]
        return library_code(base, *[float(a) if "." in a else int(a) for a in args])
    return library_code(text)
