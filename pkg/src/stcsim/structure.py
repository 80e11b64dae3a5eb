"""QR structure analysis: zero patterns, block profiles, and certificates.

A code whose upper-triangular factor R (from QR of the equivalent channel)
splits into square diagonal blocks that are themselves block-diagonal with
small upper-triangular units can be decoded with shared metric evaluations.
This module detects that pattern empirically over random channel draws,
canonicalizes it into a (n_blocks, units_per_block, unit_size) profile, and
certifies it against the algebraic sufficient conditions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .channel import equivalent_channel, sample_channel
from .codes import DispersionCode, real_expansion
from .rng import as_generator, substream

#: Relative magnitude below which an R entry counts as a structural zero.
ZERO_TOL = 1e-8
#: Relative residual allowed in the algebraic certificates.
CERT_TOL = 1e-9


class RankDeficientError(ValueError):
    """QR input did not have full column rank."""


class StructureError(ValueError):
    """Inconsistent structure arguments."""


def qr_decompose(h: np.ndarray, rank_tol: float = 1e-9):
    """Thin QR with the diagonal of R forced positive.

    Returns (q, r) with q orthonormal columns and q @ r == h.  Raises
    RankDeficientError when a diagonal entry of R vanishes relative to the
    largest one.
    """
    h = np.asarray(h, dtype=float)
    q, r = np.linalg.qr(h)
    diag = np.diagonal(r)
    scale = np.max(np.abs(diag)) if diag.size else 0.0
    if scale == 0.0 or np.min(np.abs(diag)) < rank_tol * scale:
        raise RankDeficientError("matrix does not have full column rank")
    signs = np.where(diag < 0, -1.0, 1.0)
    return q * signs[None, :], r * signs[:, None]


@dataclass(frozen=True)
class ZeroPatternMask:
    """Structural nonzero pattern of R, unioned over channel draws.

    mask[i, j] is True when |R_ij| exceeded tolerance * ||H||_F in at least
    one draw.  Strictly lower entries are always False and the diagonal is
    always True for a valid code.
    """

    mask: np.ndarray  # (L, L) bool
    draws_used: int
    tolerance: float

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StructureError("mask must be square")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def size(self) -> int:
        return int(self.mask.shape[0])

    def grid(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.mask]


def structural_zero_mask(code: DispersionCode, nr: int, n_draws: int = 16,
                         tol: float = ZERO_TOL, rng=0) -> ZeroPatternMask:
    """Mark R entries that are nonzero in any of n_draws random channels.

    Structural zeros are exact in infinite precision, so the union over draws
    only ever adds entries; accidental zeros at one channel are rejected by
    the other draws.
    """
    if n_draws < 8:
        raise StructureError("need at least 8 draws for a trustworthy mask")
    gen = as_generator(rng)
    l = code.l
    mask = np.zeros((l, l), dtype=bool)
    for _ in range(n_draws):
        ch = sample_channel(code.nt, nr, gen)
        h = equivalent_channel(code, ch)
        _, r = qr_decompose(h)
        mask |= np.abs(r) > tol * np.linalg.norm(h)
    mask &= np.triu(np.ones((l, l), dtype=bool))
    return ZeroPatternMask(mask=mask, draws_used=n_draws, tolerance=tol)


@dataclass(frozen=True)
class BlockProfile:
    """Uniform block structure of R: n_blocks diagonal blocks, each holding
    units_per_block upper-triangular units of unit_size rows."""

    n_blocks: int
    units_per_block: int
    unit_size: int

    def __post_init__(self):
        if min(self.n_blocks, self.units_per_block, self.unit_size) < 1:
            raise StructureError("profile parameters must be >= 1")

    @property
    def l(self) -> int:
        return self.n_blocks * self.units_per_block * self.unit_size

    @property
    def block_size(self) -> int:
        return self.units_per_block * self.unit_size

    def boundaries(self) -> list[tuple[int, int]]:
        """Column ranges [start, stop) of the diagonal blocks."""
        b = self.block_size
        return [(i * b, (i + 1) * b) for i in range(self.n_blocks)]

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.n_blocks, self.units_per_block, self.unit_size)


def _forbidden_positions(l: int, profile: BlockProfile) -> np.ndarray:
    """Upper-triangular positions the profile requires to be structurally zero:
    inside a diagonal block but across different units."""
    idx = np.arange(l)
    block = idx // profile.block_size
    unit = idx // profile.unit_size
    same_block = block[:, None] == block[None, :]
    cross_unit = unit[:, None] != unit[None, :]
    upper = idx[:, None] < idx[None, :]
    return same_block & cross_unit & upper


def profile_fits(mask: ZeroPatternMask, profile: BlockProfile) -> bool:
    if profile.l != mask.size:
        return False
    return not np.any(mask.mask & _forbidden_positions(mask.size, profile))


def template_mask(profile: BlockProfile) -> ZeroPatternMask:
    """Dense synthetic mask for a profile: every allowed position nonzero."""
    l = profile.l
    upper = np.triu(np.ones((l, l), dtype=bool))
    mask = upper & ~_forbidden_positions(l, profile)
    return ZeroPatternMask(mask=mask, draws_used=0, tolerance=0.0)


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def infer_profile(mask: ZeroPatternMask) -> BlockProfile | None:
    """Canonical profile of a mask, or None when it carries no structure.

    Among all (n_blocks, units_per_block, unit_size) templates consistent with
    the mask, units_per_block is maximized first, then n_blocks.  Every mask
    fits the degenerate one-unit-per-block, one-row-unit template, so that
    outcome is reported as unstructured.
    """
    l = mask.size
    for k in sorted(_divisors(l), reverse=True):
        for n_blocks in sorted(_divisors(l // k), reverse=True):
            unit = l // (k * n_blocks)
            profile = BlockProfile(n_blocks=n_blocks, units_per_block=k, unit_size=unit)
            if profile_fits(mask, profile):
                if k == 1 and n_blocks == l:
                    return None
                return profile
    return None


# ---------------------------------------------------------------------------
# Algebraic certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CertificateReport:
    """Named condition outcomes with their worst numeric residuals."""

    name: str
    conditions: dict = field(default_factory=dict)   # condition -> bool
    residuals: dict = field(default_factory=dict)    # condition -> float

    @property
    def passed(self) -> bool:
        return all(self.conditions.values())

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "conditions": dict(self.conditions),
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }


def check_quasi_orthogonality(matrices, unit_size: int = 1,
                              tol: float = CERT_TOL) -> CertificateReport:
    """Quasi-orthogonality of a dispersion subset on its real expansions.

    Conditions:
      * gram: every expansion has the same diagonal Gram matrix.  The strict
        orthonormal case is Gram = c*I; codes that leave some antennas silent
        (e.g. per-antenna-pair schemes) produce a common 0/1-patterned
        diagonal instead, which preserves the structure argument because only
        equal column norms are used.
      * skew: expansions in different units satisfy A_i^T A_j = -A_j^T A_i,
        which makes the corresponding R sub-block diagonal (block-diagonal
        for unit_size > 1) for every channel.
    """
    mats = [np.asarray(m, dtype=complex) for m in matrices]
    if len(mats) < 1:
        raise StructureError("need at least one matrix")
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise StructureError("all matrices must share one shape")
    if len(mats) % unit_size != 0:
        raise StructureError("subset size must be a multiple of unit_size")
    exps = [real_expansion(m) for m in mats]
    grams = [e.T @ e for e in exps]
    scale = max(max(float(np.max(np.abs(g))) for g in grams), 1e-300)

    gram_res = 0.0
    ref = grams[0]
    for g in grams:
        gram_res = max(gram_res, float(np.max(np.abs(g - ref))))
        off = g - np.diag(np.diagonal(g))
        gram_res = max(gram_res, float(np.max(np.abs(off))))

    skew_res = 0.0
    for i, j in itertools.combinations(range(len(exps)), 2):
        if i // unit_size == j // unit_size:
            continue  # same unit: coupling allowed
        cross = exps[i].T @ exps[j] + exps[j].T @ exps[i]
        skew_res = max(skew_res, float(np.max(np.abs(cross))))

    conditions = {"gram": gram_res <= tol * scale, "skew": skew_res <= tol * scale}
    residuals = {"gram": gram_res / scale, "skew": skew_res / scale}
    return CertificateReport("quasi_orthogonality", conditions, residuals)


def _permutation_sum_residual(a_exps: np.ndarray, b_exps: np.ndarray,
                              nt: int) -> float:
    """Worst residual of the fourth-order cross condition.

    For every pair i != j of second-set matrices, with d[p,q,s,t] =
    sum_kappa (B_i^T A_kappa)[p,s] * (B_j^T A_kappa)[q,t], the sum of d over
    all distinct permutations of every 4-index multiset from {1..2Nt} must
    vanish; those sums are the polynomial coefficients of the projection
    cross terms in the channel coefficients.
    """
    k = len(b_exps)
    dim = 2 * nt
    worst = 0.0
    scale = 1e-300
    multisets = list(itertools.combinations_with_replacement(range(dim), 4))
    perm_cache = [sorted(set(itertools.permutations(ms))) for ms in multisets]
    for i, j in itertools.combinations(range(k), 2):
        bi_a = np.einsum("up,kus->kps", b_exps[i], a_exps)
        bj_a = np.einsum("vq,kvt->kqt", b_exps[j], a_exps)
        d4 = np.einsum("kps,kqt->pqst", bi_a, bj_a)
        scale = max(scale, float(np.max(np.abs(d4))))
        for perms in perm_cache:
            total = sum(d4[p, q, s, t] for (p, q, s, t) in perms)
            worst = max(worst, abs(float(total)))
    return worst / scale


def certify_two_block(a_set, b_set, tol: float = CERT_TOL) -> CertificateReport:
    """Sufficient conditions for a two-block structure with diagonal blocks.

    Checks that the 2k real expansions span dimension 2k, that each set is
    quasi-orthogonal (common diagonal Gram + pairwise skew), and that the
    fourth-order cross sums vanish, which makes the projected second block
    diagonal for every channel realization.
    """
    a_mats = [np.asarray(m, dtype=complex) for m in a_set]
    b_mats = [np.asarray(m, dtype=complex) for m in b_set]
    if len(a_mats) != len(b_mats):
        raise StructureError("both sets must have the same size")
    shape = a_mats[0].shape
    if any(m.shape != shape for m in a_mats + b_mats):
        raise StructureError("all matrices must be T x Nt with one shape")
    nt = shape[1]

    a_exps = np.stack([real_expansion(m) for m in a_mats])
    b_exps = np.stack([real_expansion(m) for m in b_mats])
    stacked = np.concatenate([a_exps, b_exps]).reshape(2 * len(a_mats), -1)
    sv = np.linalg.svd(stacked, compute_uv=False)
    rank = int(np.sum(sv > 1e-9 * sv[0]))

    qoc_a = check_quasi_orthogonality(a_mats, tol=tol)
    qoc_b = check_quasi_orthogonality(b_mats, tol=tol)
    cross_res = _permutation_sum_residual(a_exps, b_exps, nt)

    conditions = {
        "span_dimension": rank == 2 * len(a_mats),
        "gram_a": qoc_a.conditions["gram"],
        "skew_a": qoc_a.conditions["skew"],
        "gram_b": qoc_b.conditions["gram"],
        "skew_b": qoc_b.conditions["skew"],
        "cross_sum": cross_res <= tol,
    }
    residuals = {
        "span_dimension": float(2 * len(a_mats) - rank),
        "gram_a": qoc_a.residuals["gram"],
        "skew_a": qoc_a.residuals["skew"],
        "gram_b": qoc_b.residuals["gram"],
        "skew_b": qoc_b.residuals["skew"],
        "cross_sum": cross_res,
    }
    return CertificateReport("two_block", conditions, residuals)


def certify_boundary(code: DispersionCode, nr: int, boundary: int, units: int,
                     unit_size: int = 1, n_draws: int = 16, rng=0,
                     tol: float = CERT_TOL) -> CertificateReport:
    """Certify that the block starting at column `boundary` decodes as a clean
    diagonal (or unit-block-diagonal) sub-block of R.

    Condition 1: the block's dispersion matrices are quasi-orthogonal at unit
    granularity.  Condition 2: over random channels, with Q1 spanning the
    first `boundary` columns, the projection E = Q1^T H2 has E^T E
    block-diagonal with unit_size blocks, which forces the block's R factor
    into the template shape.
    """
    k = units * unit_size
    if boundary < 0 or boundary + k > code.l:
        raise StructureError("boundary plus block size exceeds code length")
    block_mats = code.dispersion[boundary : boundary + k]
    qoc = check_quasi_orthogonality(block_mats, unit_size=unit_size, tol=tol)

    conditions = dict(qoc.conditions)
    residuals = dict(qoc.residuals)

    proj_res = 0.0
    if boundary > 0:
        gen = as_generator(rng)
        unit_idx = np.arange(k) // unit_size
        off_unit = unit_idx[:, None] != unit_idx[None, :]
        for _ in range(n_draws):
            ch = sample_channel(code.nt, nr, gen)
            h = equivalent_channel(code, ch)
            h1 = h[:, :boundary]
            h2 = h[:, boundary : boundary + k]
            q1, _ = qr_decompose(h1)
            e12 = q1.T @ h2
            ete = e12.T @ e12
            scale = max(float(np.max(np.abs(ete))), np.linalg.norm(h) ** 2 * 1e-30, 1e-300)
            proj_res = max(proj_res, float(np.max(np.abs(ete[off_unit]))) / scale)
    conditions["projection_diagonal"] = proj_res <= max(tol, 10 * ZERO_TOL)
    residuals["projection_diagonal"] = proj_res
    return CertificateReport(f"boundary_{boundary}", conditions, residuals)


@dataclass(frozen=True)
class ClassificationResult:
    """Mask, canonical profile, and per-boundary certificates for one code."""

    code_name: str
    t: int
    nt: int
    l: int
    nr: int
    mask: ZeroPatternMask
    profile: BlockProfile | None
    certificates: list

    @property
    def structured(self) -> bool:
        return self.profile is not None

    def as_dict(self) -> dict:
        return {
            "code": self.code_name,
            "T": self.t,
            "Nt": self.nt,
            "L": self.l,
            "Nr": self.nr,
            "structured": self.structured,
            "profile": None if self.profile is None else {
                "n_blocks": self.profile.n_blocks,
                "units_per_block": self.profile.units_per_block,
                "unit_size": self.profile.unit_size,
            },
            "mask": self.mask.grid(),
            "certificates": [c.as_dict() for c in self.certificates],
        }


def default_nr(code: DispersionCode) -> int:
    """Smallest receive antenna count that keeps the equivalent channel tall."""
    return max(1, -(-code.l // (2 * code.t)))


def classify_code(code: DispersionCode, nr: int | None = None, n_draws: int = 16,
                  tol: float = ZERO_TOL, rng=None, seed: int = 0) -> ClassificationResult:
    """Empirical mask, canonical profile, and boundary certificates at the
    inferred block boundaries."""
    if nr is None:
        nr = default_nr(code)
    if rng is None:
        rng = substream(seed, "classify", code.name, nr)
    gen = as_generator(rng)
    mask = structural_zero_mask(code, nr, n_draws=n_draws, tol=tol, rng=gen)
    profile = infer_profile(mask)
    certificates = []
    if profile is not None:
        for start, _ in profile.boundaries():
            certificates.append(
                certify_boundary(code, nr, start, profile.units_per_block,
                                 profile.unit_size, n_draws=max(8, n_draws // 2),
                                 rng=gen)
            )
    return ClassificationResult(
        code_name=code.name, t=code.t, nt=code.nt, l=code.l, nr=nr,
        mask=mask, profile=profile, certificates=certificates,
    )
