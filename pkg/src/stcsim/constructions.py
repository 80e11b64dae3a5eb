"""Systematic construction of high-rate codes with large orthogonal blocks.

Both constructions replicate a seed code over independent symbol sets and
scale each replica's antenna columns by a column of an extension matrix:

  * from a rate-1 seed and a full-rank Nt x Nt extension -> rate-Nt code;
  * from a rate-1/2 seed and an Nt x 2Nt extension whose stacked real/imag
    parts have full rank 2Nt -> rate-Nt code.

Replicas inherit the seed's orthogonal symbol groups, so the resulting R
factor splits into one diagonal block per (replica, group); removing whole
sub-blocks keeps the structure and just lowers the rate.

Symbol ordering of the scalable family (built on the recursive Alamouti
dispersion matrices C[l][k], l = 1..4, k = 1..2^(m-1), for 2^m antennas):
with unit size g = 2^(m-n), the symbols of replica i are picked as

    block (i, b):  C[1][(b-1)g+1..bg], C[2][(b-1)g+1..bg],
                   C[3][(b-1)g+1..bg], C[4][(b-1)g+1..bg]   (b = 1..2^(n-1))

i.e. four runs of g consecutive k-indices per block, one run per l.  Each run
is one upper-triangular unit; the four runs of a block are mutually
orthogonal.  Index table for m = 2 (seed symbols per replica, in order):

    n = 1 (one block of four 2-wide units per replica, unit size g = 2):
        s1 -> C[1][1], s2 -> C[1][2], s3 -> C[2][1], s4 -> C[2][2],
        s5 -> C[3][1], s6 -> C[3][2], s7 -> C[4][1], s8 -> C[4][2]
    n = 2 (two blocks of four scalar units per replica, unit size g = 1):
        block 1: s1 -> C[1][1], s2 -> C[2][1], s3 -> C[3][1], s4 -> C[4][1]
        block 2: s5 -> C[1][2], s6 -> C[2][2], s7 -> C[3][2], s8 -> C[4][2]
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codes import (CodeError, Constellation, DispersionCode, alamouti_matrices,
                    jabba_seed, ostbc_half_rate_5tx)

#: Default guard on the number of enumerated symbol-difference vectors.
MAX_DIFFERENCE_VECTORS = 1 << 25

#: Reference phase of the rate-2 design coefficients found by grid search.
REFERENCE_PHASE = 0.3218


class ConstructionError(CodeError):
    """Seed or extension matrix violates a construction precondition."""


def hadamard(n: int) -> np.ndarray:
    """Order-n leading principal submatrix of the infinite +-1 matrix built by
    the doubling recursion [[M, M], [M, -M]]; an exact Hadamard matrix when n
    is a power of two."""
    if n < 1:
        raise ConstructionError("hadamard order must be >= 1")
    size = 1
    m = np.array([[1.0]])
    while size < n:
        m = np.block([[m, m], [m, -m]])
        size *= 2
    return m[:n, :n].copy()


def _position_symbol_counts(dispersion: np.ndarray) -> np.ndarray:
    """Number of dispersion matrices feeding each space-time position."""
    return np.sum(np.abs(dispersion) > 0, axis=0)


def _check_complex_positions(seed: DispersionCode) -> None:
    """Each space-time position may carry at most one complex symbol: at most
    two dispersion matrices touch it, and their coefficients must span the
    complex plane over the reals."""
    counts = _position_symbol_counts(seed.dispersion)
    if np.any(counts > 2):
        raise ConstructionError(
            f"seed {seed.name} stacks more than one complex symbol on a position")
    for t in range(seed.t):
        for n in range(seed.nt):
            coeffs = seed.dispersion[:, t, n]
            nz = coeffs[np.abs(coeffs) > 0]
            if len(nz) == 2:
                pair = np.array([[nz[0].real, nz[0].imag],
                                 [nz[1].real, nz[1].imag]])
                if abs(np.linalg.det(pair)) < 1e-12 * np.max(np.abs(pair)) ** 2:
                    raise ConstructionError(
                        f"seed {seed.name} has two dependent real symbols at "
                        f"position ({t}, {n})")


def _check_real_positions(seed: DispersionCode) -> None:
    if np.any(_position_symbol_counts(seed.dispersion) > 1):
        raise ConstructionError(
            f"seed {seed.name} stacks more than one real symbol on a position")


def _extend(seed: DispersionCode, ext: np.ndarray, name: str) -> DispersionCode:
    mats = []
    for col in ext.T:
        for c in seed.dispersion:
            mats.append(c * col[None, :])
    return DispersionCode.from_matrices(name, np.array(mats), t=seed.t, nt=seed.nt)


def construct_from_rate1(seed: DispersionCode, ext: np.ndarray,
                         name: str | None = None) -> DispersionCode:
    """Rate-Nt code from a rate-1 seed: replica i uses dispersion matrices
    C_l * diag(column i of ext).  ext must be full-rank Nt x Nt and the seed
    may carry at most one complex symbol per space-time position."""
    ext = np.asarray(ext, dtype=complex)
    if abs(seed.rate - 1.0) > 1e-12:
        raise ConstructionError(f"seed {seed.name} has rate {seed.rate}, need 1")
    if ext.shape != (seed.nt, seed.nt):
        raise ConstructionError(f"extension must be {seed.nt}x{seed.nt}")
    sv = np.linalg.svd(ext, compute_uv=False)
    if sv[-1] < 1e-9 * sv[0]:
        raise ConstructionError("extension matrix is rank deficient")
    _check_complex_positions(seed)
    return _extend(seed, ext, name or f"{seed.name}_x{seed.nt}")


def construct_from_half_rate(seed: DispersionCode, ext: np.ndarray,
                             name: str | None = None) -> DispersionCode:
    """Rate-Nt code from a rate-1/2 seed and an Nt x 2Nt extension whose
    stacked real/imaginary parts have full rank 2Nt.  The seed may carry at
    most one real symbol per space-time position."""
    ext = np.asarray(ext, dtype=complex)
    if abs(seed.rate - 0.5) > 1e-12:
        raise ConstructionError(f"seed {seed.name} has rate {seed.rate}, need 1/2")
    if ext.shape != (seed.nt, 2 * seed.nt):
        raise ConstructionError(f"extension must be {seed.nt}x{2 * seed.nt}")
    stacked = np.vstack([ext.real, ext.imag])
    sv = np.linalg.svd(stacked, compute_uv=False)
    if sv.size < 2 * seed.nt or sv[2 * seed.nt - 1] < 1e-9 * sv[0]:
        raise ConstructionError("stacked real/imag extension is rank deficient")
    _check_real_positions(seed)
    return _extend(seed, ext, name or f"{seed.name}_x{seed.nt}")


# ---------------------------------------------------------------------------
# Concrete family members
# ---------------------------------------------------------------------------

def rate4_4tx() -> DispersionCode:
    """Rate-4 code for four antennas: quasi-orthogonal seed replicated over the
    columns of the order-4 Hadamard matrix.  Eight diagonal blocks of four."""
    return construct_from_rate1(jabba_seed(), hadamard(4), name="rate4_4tx")


def _recursive_alamouti(m: int) -> dict:
    """Dispersion matrices C[(l, k)] of the rate-1 code for 2^m antennas:
    C[l, 2k-1] places the level-(m-1) matrix on the diagonal, C[l, 2k] on the
    anti-diagonal."""
    mats = {(l, 1): alamouti_matrices()[l - 1] for l in range(1, 5)}
    for level in range(2, m + 1):
        nxt = {}
        half = 2 ** (level - 1)
        zero = np.zeros((half, half), dtype=complex)
        for (l, k), c in mats.items():
            nxt[(l, 2 * k - 1)] = np.block([[c, zero], [zero, c]])
            nxt[(l, 2 * k)] = np.block([[zero, c], [c, zero]])
        mats = nxt
    return mats


def scalable_code(m: int, n: int) -> DispersionCode:
    """Rate-2^m code for 2^m antennas whose block structure is tuned by n:
    2^(m+n-1) blocks of four units of size 2^(m-n).  The unit size follows
    the picking order documented in the module docstring."""
    if m < 1 or not (1 <= n <= m):
        raise ConstructionError("need m >= 1 and 1 <= n <= m")
    family = _recursive_alamouti(m)
    gamma = 2 ** (m - n)
    order = []
    for b in range(2 ** (n - 1)):
        for l in range(1, 5):
            for j in range(gamma):
                order.append(family[(l, b * gamma + j + 1)])
    seed = DispersionCode.from_matrices(f"seed_2^{m}tx", np.array(order))
    return construct_from_rate1(seed, hadamard(2 ** m),
                                name=f"scalable({m},{n})")


def rate5_5tx() -> DispersionCode:
    """Rate-5 code for five antennas from the rate-1/2 real orthogonal seed;
    ten diagonal blocks of eight fully orthogonal symbols each.

    The extension pairs each antenna with an in-phase and a quadrature
    replica ([I | jI]).  Dense extensions cannot reach eight-symbol blocks
    with this seed: the projection of any replica onto another is only
    conflict free when the two replicas are carried by the same antenna
    column in quadrature, so per-antenna pairs are the structure-preserving
    family.
    """
    ext = np.hstack([np.eye(5), 1j * np.eye(5)]).astype(complex)
    return construct_from_half_rate(ostbc_half_rate_5tx(), ext, name="rate5_5tx")


def rate2_coefficients(theta: float) -> np.ndarray:
    """Unit-modulus 4x4 coefficient matrix with the two-phase row pattern
    (1, 1, e^{j theta}, e^{j theta})."""
    p = np.ones((4, 4), dtype=complex)
    p[2:, :] = np.exp(1j * theta)
    return p


def optimized_rate2(coefficients: np.ndarray | None = None) -> DispersionCode:
    """Rate-2 code for four antennas: the two orthogonal halves of the
    quasi-orthogonal seed are replicated on Hadamard columns 1 and 3, each
    scaled by a unit-modulus coefficient row.  The block structure is
    coefficient invariant; the coefficients set the coding gain."""
    p = rate2_coefficients(REFERENCE_PHASE) if coefficients is None \
        else np.asarray(coefficients, dtype=complex)
    if p.shape != (4, 4):
        raise ConstructionError("coefficient matrix must be 4x4")
    if np.any(np.abs(np.abs(p) - 1.0) > 1e-9):
        raise ConstructionError("coefficients must be unit modulus")
    seed = jabba_seed().dispersion
    had = hadamard(4)
    mats = []
    for i in (0, 1):
        ext_col = had[:, 2 * i]            # columns 1 and 3
        for half in (0, 1):
            row = p[2 * i + half]
            for l in range(4):
                mats.append(seed[4 * half + l] * (row * ext_col)[None, :])
    return DispersionCode.from_matrices("rate2_4tx", np.array(mats), t=4, nt=4)


def remove_blocks(code: DispersionCode, block_size: int, keep: int,
                  name: str | None = None) -> DispersionCode:
    """Truncate a constructed code to its first `keep` sub-blocks."""
    if keep * block_size > code.l or keep < 1:
        raise ConstructionError("cannot keep that many blocks")
    mats = code.dispersion[: keep * block_size]
    return DispersionCode.from_matrices(name or f"{code.name}_g{keep}", mats,
                                        t=code.t, nt=code.nt)


# ---------------------------------------------------------------------------
# Coding-gain evaluation and the coefficient search
# ---------------------------------------------------------------------------

def _det4_batch(mats: np.ndarray) -> np.ndarray:
    """Determinants of a (n, 4, 4) complex stack via 2x2 minor expansion."""
    a = mats
    m01 = {}
    m23 = {}
    for (i, j) in ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
        m01[(i, j)] = a[:, 0, i] * a[:, 1, j] - a[:, 0, j] * a[:, 1, i]
        m23[(i, j)] = a[:, 2, i] * a[:, 3, j] - a[:, 2, j] * a[:, 3, i]
    return (m01[(0, 1)] * m23[(2, 3)] - m01[(0, 2)] * m23[(1, 3)]
            + m01[(0, 3)] * m23[(1, 2)] + m01[(1, 2)] * m23[(0, 3)]
            - m01[(1, 3)] * m23[(0, 2)] + m01[(2, 3)] * m23[(0, 1)])


def _difference_values(constellation: Constellation) -> np.ndarray:
    """All distinct level differences, zero included, ascending."""
    step = float(constellation.levels[1] - constellation.levels[0])
    m = constellation.m
    return step * np.arange(-(m - 1), m)


@dataclass(frozen=True)
class MinDetResult:
    min_det: float          # min over nonzero differences of det((DX)^H DX)
    argmin: np.ndarray      # a difference vector achieving it
    n_vectors: int          # canonical vectors evaluated


def _difference_table(l: int, values: np.ndarray) -> np.ndarray:
    """All value^l difference vectors for l symbols, shape (v^l, l)."""
    v = len(values)
    nums = np.arange(v ** l, dtype=np.int64)
    digits = np.empty((v ** l, l), dtype=np.int64)
    for i in range(l):
        digits[:, i] = (nums // (v ** (l - 1 - i))) % v
    return values[digits]


def min_determinant(code: DispersionCode, constellation: Constellation,
                    max_vectors: int = MAX_DIFFERENCE_VECTORS,
                    batch: int = 64) -> MinDetResult:
    """Minimum of det((DX)^H (DX)) over all nonzero codeword differences.

    Linearity lets us enumerate symbol-difference vectors instead of codeword
    pairs, and sign symmetry halves that to vectors whose first nonzero entry
    is positive.  The difference matrices are assembled as sums of
    precomputed half-vector contributions, so the inner loop is pure
    addition plus a batched determinant.  Guarded: (2M-1)^L canonical
    vectors must not exceed max_vectors.
    """
    l = code.l
    m = constellation.m
    n_values = 2 * m - 1
    total = n_values ** l
    n_canonical = (total - 1) // 2
    if n_canonical > max_vectors:
        raise ConstructionError(
            f"difference enumeration of {n_canonical} vectors exceeds "
            f"the guard of {max_vectors}")
    values = _difference_values(constellation)
    disp = code.scaled_dispersion().reshape(l, -1)   # (L, T*Nt)
    square = code.t == code.nt

    # Split the symbol vector; assemble DX = head part + tail part.
    l_head = max(1, l // 2)
    while n_values ** l_head > (1 << 16):
        l_head -= 1
    l_tail = l - l_head
    head = _difference_table(l_head, values)
    tail = _difference_table(l_tail, values)
    head_parts = head @ disp[:l_head].reshape(l_head, -1)
    tail_parts = tail @ disp[l_head:].reshape(l_tail, -1)

    def dets_of(dx_flat: np.ndarray) -> np.ndarray:
        dx = dx_flat.reshape(-1, code.t, code.nt)
        if square and code.t == 4:
            return np.abs(_det4_batch(dx)) ** 2
        if square:
            return np.abs(np.linalg.det(dx)) ** 2
        gram = np.einsum("nti,ntj->nij", dx.conj(), dx)
        return np.abs(np.linalg.det(gram))

    # Canonical classification of head vectors: positive-leading heads take
    # every tail; the all-zero head takes positive-leading tails only.
    head_nz = head != 0.0
    head_first = head_nz.argmax(axis=1)
    head_lead = head[np.arange(len(head)), head_first]
    keep_head = np.flatnonzero(head_lead > 0)

    tail_nz = tail != 0.0
    tail_first = tail_nz.argmax(axis=1)
    tail_lead = tail[np.arange(len(tail)), tail_first]
    keep_tail_for_zero_head = np.flatnonzero(tail_lead > 0)

    best = math.inf
    best_vec = None

    if keep_tail_for_zero_head.size:
        dets = dets_of(tail_parts[keep_tail_for_zero_head])
        pos = int(np.argmin(dets))
        if dets[pos] < best:
            best = float(dets[pos])
            best_vec = np.concatenate(
                [np.zeros(l_head), tail[keep_tail_for_zero_head[pos]]])

    n_tail = len(tail)
    for lo in range(0, len(keep_head), batch):
        rows = keep_head[lo : lo + batch]
        dx = head_parts[rows][:, None, :] + tail_parts[None, :, :]
        dets = dets_of(dx.reshape(-1, dx.shape[-1]))
        pos = int(np.argmin(dets))
        if dets[pos] < best:
            best = float(dets[pos])
            r, c = divmod(pos, n_tail)
            best_vec = np.concatenate([head[rows[r]], tail[c]])
    return MinDetResult(min_det=best, argmin=best_vec, n_vectors=n_canonical)


@dataclass(frozen=True)
class SearchPoint:
    theta: float
    min_det: float
    profile: tuple | None


@dataclass(frozen=True)
class SearchReport:
    points: list
    best_theta: float
    best_min_det: float


def rate2_phase_scan(thetas, constellation: Constellation,
                     max_vectors: int = MAX_DIFFERENCE_VECTORS,
                     batch: int = 64) -> np.ndarray:
    """Minimum difference determinant of the rate-2 family for every phase.

    The family splits as DX(theta) = G + e^{j theta} K with G from the first
    eight symbols and K from the last eight, so each pair's determinant is a
    degree-4 polynomial in e^{j theta}.  Its five coefficients come from five
    determinant evaluations at the fifth roots of unity (an exact inverse
    DFT), after which every grid phase costs only a polynomial evaluation.
    Equal to running min_determinant per phase, at a fraction of the work.
    """
    thetas = np.asarray([float(t) for t in thetas])
    if thetas.size == 0:
        raise ConstructionError("theta grid is empty")
    base = optimized_rate2(rate2_coefficients(0.0))
    l = base.l
    m = constellation.m
    n_values = 2 * m - 1
    total = n_values ** l
    if (total - 1) // 2 > max_vectors:
        raise ConstructionError(
            f"difference enumeration of {(total - 1) // 2} vectors exceeds "
            f"the guard of {max_vectors}")
    values = _difference_values(constellation)
    disp = base.scaled_dispersion().reshape(l, -1)
    l_head = l // 2
    head = _difference_table(l_head, values)
    tail = _difference_table(l - l_head, values)
    head_parts = head @ disp[:l_head]
    tail_parts = tail @ disp[l_head:]

    head_first = (head != 0.0).argmax(axis=1)
    head_lead = head[np.arange(len(head)), head_first]
    keep_head = np.flatnonzero(head_lead > 0)
    tail_first = (tail != 0.0).argmax(axis=1)
    tail_lead = tail[np.arange(len(tail)), tail_first]
    keep_tail_zero_head = np.flatnonzero(tail_lead > 0)

    nodes = np.exp(2j * np.pi * np.arange(5) / 5)          # interpolation nodes
    eval_pows = np.exp(1j * thetas)[:, None] ** np.arange(5)[None, :]
    inv_dft = np.exp(-2j * np.pi * np.outer(np.arange(5), np.arange(5)) / 5) / 5

    best = np.full(thetas.shape, math.inf)

    if keep_tail_zero_head.size:
        # zero head: DX = e K, |det| is phase independent
        dets = np.abs(_det4_batch(
            tail_parts[keep_tail_zero_head].reshape(-1, 4, 4))) ** 2
        best[:] = float(np.min(dets))

    n_tail = len(tail)
    for lo in range(0, len(keep_head), batch):
        rows = keep_head[lo : lo + batch]
        g = head_parts[rows][:, None, :]                    # (b, 1, 16)
        node_dets = np.empty((len(rows) * n_tail, 5), dtype=complex)
        for k, e in enumerate(nodes):
            dx = (g + e * tail_parts[None, :, :]).reshape(-1, 4, 4)
            node_dets[:, k] = _det4_batch(dx)
        coeffs = node_dets @ inv_dft.T                      # (pairs, 5)
        vals = np.abs(coeffs @ eval_pows.T) ** 2            # (pairs, n_theta)
        np.minimum(best, vals.min(axis=0), out=best)
    return best


def search_coefficients(theta_grid, constellation: Constellation | None = None,
                        max_vectors: int = MAX_DIFFERENCE_VECTORS,
                        classify: bool = True, seed: int = 0) -> SearchReport:
    """Grid search of the rate-2 design phase maximizing the minimum codeword
    difference determinant.  Ties resolve toward the smaller phase.  Each grid
    point also reports the (coefficient-invariant) block profile when
    classify=True."""
    thetas = [float(t) for t in theta_grid]
    if not thetas:
        raise ConstructionError("theta grid is empty")
    const = constellation or Constellation.pam(2)
    from .structure import classify_code  # local import to avoid a cycle

    scores = rate2_phase_scan(thetas, const, max_vectors=max_vectors)
    points = []
    best_theta, best_score = None, -math.inf
    for theta, score in zip(thetas, scores):
        profile = None
        if classify:
            cls = classify_code(optimized_rate2(rate2_coefficients(theta)),
                                seed=seed)
            profile = cls.profile.as_tuple() if cls.profile else None
        points.append(SearchPoint(theta=theta, min_det=float(score),
                                  profile=profile))
        if score > best_score or (score == best_score and theta < best_theta):
            best_theta, best_score = theta, float(score)
    return SearchReport(points=points, best_theta=best_theta, best_min_det=best_score)
