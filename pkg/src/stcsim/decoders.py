"""Exhaustive ML decoding and breadth-first QR tree search (M-algorithm).

Both tree decoders QR-factor sqrt(rho)*H, rotate the observation, and sweep
the symbols from the last R column to the first, keeping at most `mc`
surviving paths per stage.  The structure-aware variant notices that, inside
a diagonal block of R, sibling units do not enter each other's branch
metrics, so an increment only depends on the survivor's ancestor at the last
block boundary; it is computed once per distinct ancestor and reused.  The
survivor sets, and hence the decisions, are identical to the plain search;
only the number of metric evaluations drops.

Evaluation counting follows the convention that a stage is free while the
fully expanded tree still fits within the survivor budget, since no pruning
decision is needed there; the final stage is always counted because the
decision itself needs the metrics.  Raw counters that bill every computed
increment are kept alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codes import Constellation
from .structure import BlockProfile, qr_decompose

#: Guard for exhaustive search spaces.
ML_CANDIDATE_LIMIT = 2 ** 24


class DecodeError(ValueError):
    """Invalid decoder configuration or inputs."""


class ProfileMismatchError(DecodeError):
    """The supplied block profile contradicts the R matrix actually seen."""


@dataclass(frozen=True)
class DecoderConfig:
    """Survivor budget, symbol alphabet, and optional block structure."""

    mc: int
    constellation: Constellation
    profile: BlockProfile | None = None

    def __post_init__(self):
        if self.mc < 1:
            raise DecodeError("survivor budget mc must be >= 1")


@dataclass
class DecodeOutcome:
    """Decision plus bookkeeping from one decode call."""

    symbols: np.ndarray            # decided levels, length L
    indices: np.ndarray            # decided level indices, length L
    metric: float                  # Euclidean metric of the decision
    metric_evals: int              # counted under the pruning convention
    metric_evals_raw: int          # every computed branch increment
    mceq_per_stage: list           # distinct boundary ancestors per stage
    survivors_per_stage: list      # survivor counts per stage
    survivor_paths: list | None = None  # per-stage path arrays (optional)


def _unit_candidates(constellation: Constellation, unit_size: int) -> np.ndarray:
    """All level tuples for one unit, shape (M**unit_size, unit_size), ordered
    lexicographically by level index with the unit's first row most
    significant.  This fixed order makes tie-breaking reproducible."""
    m = constellation.m
    n = m ** unit_size
    out = np.empty((n, unit_size))
    idx = np.arange(n)
    for r in range(unit_size):
        digit = (idx // (m ** (unit_size - 1 - r))) % m
        out[:, r] = constellation.levels[digit]
    return out


def _candidate_indices(m: int, unit_size: int) -> np.ndarray:
    n = m ** unit_size
    idx = np.arange(n)
    digits = np.empty((n, unit_size), dtype=np.int64)
    for r in range(unit_size):
        digits[:, r] = (idx // (m ** (unit_size - 1 - r))) % m
    return digits


def structural_zeroed_r(r: np.ndarray, profile: BlockProfile,
                        tol: float = 1e-7) -> np.ndarray:
    """Copy of R with the profile's structural zeros set to exact zero.

    Raises ProfileMismatchError when a supposedly structural zero carries
    real energy, i.e. the profile does not describe this code/channel.
    """
    l = r.shape[0]
    if profile.l != l:
        raise ProfileMismatchError(f"profile describes L={profile.l}, R is {l}x{l}")
    idx = np.arange(l)
    block = idx // profile.block_size
    unit = idx // profile.unit_size
    forbidden = ((block[:, None] == block[None, :])
                 & (unit[:, None] != unit[None, :])
                 & (idx[:, None] < idx[None, :]))
    worst = float(np.max(np.abs(r[forbidden]))) if forbidden.any() else 0.0
    if worst > tol * np.linalg.norm(r):
        raise ProfileMismatchError(
            f"structural zero holds {worst:.3e} relative energy; profile inconsistent")
    out = r.copy()
    out[forbidden] = 0.0
    return out


def _stage_layout(l: int, profile: BlockProfile | None):
    """Decode-order stages: (column start, block id) per stage, last unit first.

    Without a profile every symbol is its own stage and its own block, which
    disables both structural zeroing and metric sharing.  The first-decoded
    block also gets one id per stage: sharing is defined through ancestors at
    the previous block boundary, and the first block has none, so its
    evaluations are billed per surviving path like the plain decoder's.
    """
    if profile is None:
        return 1, [(l - 1 - s, l - 1 - s) for s in range(l)]
    gamma = profile.unit_size
    n_stages = l // gamma
    first_block = profile.n_blocks - 1
    layout = []
    for s in range(n_stages):
        start = l - (s + 1) * gamma
        block = start // profile.block_size
        if block == first_block:
            layout.append((start, l + s))   # unique id: no shared ancestors
        else:
            layout.append((start, block))
    return gamma, layout


def _tree_search(r: np.ndarray, yprime: np.ndarray, cfg: DecoderConfig,
                 share: bool, record_survivors: bool) -> DecodeOutcome:
    """Breadth-first search over R shared by both decoders.

    share=False evaluates every branch increment once per surviving parent
    (plain M-algorithm); share=True evaluates once per distinct block-boundary
    ancestor and reuses the value across that ancestor's siblings.
    """
    l = r.shape[0]
    mc = cfg.mc
    m = cfg.constellation.m
    gamma, layout = _stage_layout(l, cfg.profile)
    mg = m ** gamma
    n_stages = len(layout)
    cand_levels = _unit_candidates(cfg.constellation, gamma)   # (mg, gamma)
    cand_digits = _candidate_indices(m, gamma)

    # Parent state, kept in path-lexicographic order at all times.
    sym = np.zeros((1, l))
    residual = np.tile(yprime, (1, 1)).astype(float)   # y' - R @ decided
    metrics = np.zeros(1)
    paths = np.zeros((1, 0), dtype=np.int32)
    prefix = np.zeros(1, dtype=np.int64)

    evals_counted = 0
    evals_raw = 0
    mceq_per_stage = []
    survivors_per_stage = []
    survivor_paths = [] if record_survivors else None
    best_path = None
    best_metric = math.inf
    best_row = None
    prev_block = layout[0][1]

    for s, (start, block_id) in enumerate(layout):
        if block_id != prev_block:
            # Crossing a block boundary: survivors become the new ancestors.
            prefix = np.arange(len(metrics), dtype=np.int64)
            prev_block = block_id
        rows = slice(start, start + gamma)
        p_count = len(metrics)

        if share:
            uniq, rep_idx, group = np.unique(prefix, return_index=True,
                                             return_inverse=True)
            n_groups = len(uniq)
        else:
            rep_idx = np.arange(p_count)
            group = rep_idx
            n_groups = p_count
        mceq = len(np.unique(prefix))
        mceq_per_stage.append(int(mceq))

        # Branch increments per (ancestor representative, candidate).
        base = residual[rep_idx][:, rows]                         # (G, gamma)
        block = r[rows, rows] @ cand_levels.T                     # (gamma, mg)
        diff = base[:, :, None] - block[None, :, :]                # (G, gamma, mg)
        inc = np.einsum("grc,grc->gc", diff, diff)                 # (G, mg)

        expanded = metrics[:, None] + inc[group]                   # (P, mg)
        flat = expanded.ravel()
        parent_of = np.repeat(np.arange(p_count), mg)
        cand_of = np.tile(np.arange(mg), p_count)

        # Counting. full expansion of the whole tree at this stage, exact ints.
        tree_size = mg ** (s + 1)
        below = mg ** s
        gate = (mc < tree_size) or (s == n_stages - 1)
        evals_raw += n_groups * mg
        if gate:
            if share:
                evals_counted += mg * (below if mc > below else mceq)
            else:
                evals_counted += p_count * mg

        keep = min(mc, flat.size)
        order = np.lexsort((cand_of, parent_of, flat))
        sel = order[:keep]
        if s == n_stages - 1:
            best_row = sel[0]
            best_metric = float(flat[best_row])
            best_parent = parent_of[best_row]
            best_cand = cand_of[best_row]

        # Restore path-lexicographic ordering for the next stage.
        resort = np.lexsort((cand_of[sel], parent_of[sel]))
        sel = sel[resort]
        p_sel = parent_of[sel]
        c_sel = cand_of[sel]

        sym = sym[p_sel]
        sym[:, rows] = cand_levels[c_sel]
        residual = residual[p_sel] - cand_levels[c_sel] @ r[:, rows].T
        metrics = flat[sel]
        paths = np.hstack([paths[p_sel], c_sel[:, None].astype(np.int32)])
        prefix = prefix[p_sel]

        survivors_per_stage.append(int(len(metrics)))
        if record_survivors:
            survivor_paths.append(paths.copy())
        if s == n_stages - 1:
            where = np.flatnonzero((p_sel == best_parent) & (c_sel == best_cand))
            best_path = int(where[0])

    decided_sym = sym[best_path]
    digits = paths[best_path]
    indices = np.empty(l, dtype=np.int64)
    for s, (start, _) in enumerate(layout):
        indices[start : start + gamma] = cand_digits[digits[s]]
    return DecodeOutcome(
        symbols=decided_sym,
        indices=indices,
        metric=best_metric,
        metric_evals=int(evals_counted),
        metric_evals_raw=int(evals_raw),
        mceq_per_stage=mceq_per_stage,
        survivors_per_stage=survivors_per_stage,
        survivor_paths=survivor_paths,
    )


def _prepare(h: np.ndarray, y: np.ndarray, rho: float, cfg: DecoderConfig):
    g = math.sqrt(rho) * np.asarray(h, dtype=float)
    q, r = qr_decompose(g)
    yprime = q.T @ np.asarray(y, dtype=float)
    if cfg.profile is not None:
        r = structural_zeroed_r(r, cfg.profile)
    return r, yprime


def decode_traditional(h: np.ndarray, y: np.ndarray, rho: float,
                       cfg: DecoderConfig,
                       record_survivors: bool = False) -> DecodeOutcome:
    """Plain breadth-first M-algorithm: every surviving path evaluates its own
    branch metrics.  A profile, when given, fixes the unit size and pins the
    structural zeros of R to exact zero so results are comparable bit-for-bit
    with the structure-aware decoder."""
    r, yprime = _prepare(h, y, rho, cfg)
    return _tree_search(r, yprime, cfg, share=False,
                        record_survivors=record_survivors)


def decode_simplified(h: np.ndarray, y: np.ndarray, rho: float,
                      cfg: DecoderConfig,
                      record_survivors: bool = False) -> DecodeOutcome:
    """Structure-aware M-algorithm: branch metrics inside a block are computed
    once per distinct block-boundary ancestor and shared across its sibling
    expansions.  Survivor sets and the final decision match the plain decoder
    exactly; only the evaluation counters differ."""
    if cfg.profile is None:
        raise DecodeError("the structure-aware decoder needs a block profile")
    r, yprime = _prepare(h, y, rho, cfg)
    return _tree_search(r, yprime, cfg, share=True,
                        record_survivors=record_survivors)


def decode_ml(h: np.ndarray, y: np.ndarray, rho: float,
              constellation: Constellation, l: int | None = None,
              chunk: int = 1 << 16) -> np.ndarray:
    """Exhaustive minimum-distance decision over all M**L symbol vectors.

    Candidates are enumerated with the last symbol most significant so the
    first minimum is the lexicographically smallest tie, matching the tree
    decoders' tie-break.  Guarded to M**L <= 2**24.
    """
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    if l is None:
        l = h.shape[1]
    m = constellation.m
    total = m ** l
    if total > ML_CANDIDATE_LIMIT:
        raise DecodeError(f"search space M^L = {total} exceeds the exhaustive limit")
    g = math.sqrt(rho) * h
    best_metric = math.inf
    best_idx = None
    weights = np.array([m ** (l - 1 - i) for i in range(l)], dtype=np.int64)
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        nums = np.arange(lo, hi, dtype=np.int64)
        # digit i (most significant first) selects the level of symbol L-i
        digits = (nums[:, None] // weights[None, :]) % m
        # column order: digit 0 belongs to s_L, digit L-1 to s_1
        levels = constellation.levels[digits[:, ::-1]]
        resid = y[None, :] - levels @ g.T
        metrics = np.einsum("ij,ij->i", resid, resid)
        pos = int(np.argmin(metrics))
        if metrics[pos] < best_metric:
            best_metric = float(metrics[pos])
            best_idx = digits[pos, ::-1].copy()
    return constellation.levels[best_idx]


# ---------------------------------------------------------------------------
# Complexity accounting
# ---------------------------------------------------------------------------

def complexity_traditional(l: int, m: int, mc: int, t: int) -> float:
    """Average likelihood evaluations per symbol duration of the plain
    M-algorithm.  Stages whose full expansion fits inside the survivor budget
    are free except for the final decision stage; a counted stage costs M
    evaluations per surviving parent."""
    if min(l, m, mc, t) < 1:
        raise DecodeError("all arguments must be >= 1")
    total = 0
    for s in range(l):  # s stages already done; processing symbol l - s
        tree_size = m ** (s + 1)
        gate = (mc < tree_size) or (s == l - 1)
        if gate:
            parents = min(mc, m ** s)
            total += m * parents
    return total / t


def complexity_simplified_estimate(mceq_traces, l: int, m: int, mc: int, t: int,
                                   unit_size: int = 1) -> float:
    """Monte Carlo average of the structure-aware evaluation count, computed
    from measured per-stage distinct-ancestor counts.  Equals the decoder's
    own counted average by construction of the counting convention."""
    traces = list(mceq_traces)
    if not traces:
        raise DecodeError("need at least one measured trace")
    mg = m ** unit_size
    n_stages = l // unit_size
    acc = 0.0
    for trace in traces:
        if len(trace) != n_stages:
            raise DecodeError(f"trace length {len(trace)} != stage count {n_stages}")
        total = 0
        for s, mceq in enumerate(trace):
            tree_size = mg ** (s + 1)
            gate = (mc < tree_size) or (s == n_stages - 1)
            if gate:
                below = mg ** s
                total += mg * (below if mc > below else mceq)
        acc += total / t
    return acc / len(traces)


def reduction_bound(units_per_block: int, m: int, unit_size: int = 1) -> float:
    """Floor on the shared/plain evaluation ratio achievable inside one block:
    M^g / (k (M^g - 1)), clamped to 1 when no sharing is possible."""
    if min(units_per_block, m, unit_size) < 1:
        raise DecodeError("all arguments must be >= 1")
    mg = m ** unit_size
    if mg <= 1:
        return 1.0
    return min(1.0, mg / (units_per_block * (mg - 1)))
