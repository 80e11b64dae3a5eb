"""Monte Carlo experiment runners: classification reports, shared-path
statistics, complexity comparisons, and BER sweeps.

Every trial draws from a substream keyed by (master seed, point values,
trial index), so records are byte-identical no matter how points are
batched, filtered for resumption, or parallelized, and the same noise hits
every decoder under comparison.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .channel import SnrPoint, equivalent_channel, sample_channel
from .codes import Constellation, DispersionCode, resolve_code
from .decoders import (DecoderConfig, complexity_traditional, decode_ml,
                       decode_simplified, decode_traditional, reduction_bound)
from .rng import substream
from .structure import BlockProfile, classify_code, default_nr

#: Pinned CSV column contract for sweep records.
CSV_HEADER = ("code,snr_db,mc,trials,bit_errors,ber,ber_ci_lo,ber_ci_hi,"
              "avg_metric_evals,decoder,seed")

DECODERS = ("trad", "simp", "ml")


class ExperimentError(ValueError):
    """Bad experiment configuration."""


def wilson_interval(errors: int, n: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = errors / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == n else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a code, a decoder, and the sweep axes."""

    code: str
    nr: int | None = None
    m: int = 4                      # PAM levels per real dimension
    decoder: str = "simp"
    mc: tuple = (16,)
    snr_db: tuple = (10.0,)
    trials: int = 100_000
    seed: int = 0
    max_errors: int | None = 200    # early stop per point, None = fixed trials
    noiseless: bool = False

    def __post_init__(self):
        if self.decoder not in DECODERS:
            raise ExperimentError(f"decoder must be one of {DECODERS}")
        if self.trials < 1:
            raise ExperimentError("trials must be >= 1")
        if any(c < 1 for c in self.mc):
            raise ExperimentError("survivor budgets must be >= 1")
        if any(not math.isfinite(s) for s in self.snr_db):
            raise ExperimentError("SNR points must be finite")
        object.__setattr__(self, "mc", tuple(int(c) for c in self.mc))
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))


@dataclass(frozen=True)
class ExperimentRecord:
    """One row of a sweep: a (code, SNR, budget, decoder) operating point."""

    code: str
    snr_db: float
    mc: int
    trials: int
    bit_errors: int
    ber: float
    ber_ci_lo: float
    ber_ci_hi: float
    avg_metric_evals: float
    decoder: str
    seed: int
    elapsed_s: float = 0.0
    mceq_mean: tuple | None = None

    def csv_row(self) -> str:
        return ",".join([
            self.code, repr(float(self.snr_db)), str(self.mc), str(self.trials),
            str(self.bit_errors), repr(float(self.ber)),
            repr(float(self.ber_ci_lo)), repr(float(self.ber_ci_hi)),
            repr(float(self.avg_metric_evals)), self.decoder, str(self.seed),
        ])

    def as_dict(self) -> dict:
        d = {
            "code": self.code, "snr_db": self.snr_db, "mc": self.mc,
            "trials": self.trials, "bit_errors": self.bit_errors,
            "ber": self.ber, "ber_ci_lo": self.ber_ci_lo,
            "ber_ci_hi": self.ber_ci_hi,
            "avg_metric_evals": self.avg_metric_evals,
            "decoder": self.decoder, "seed": self.seed,
            "elapsed_s": self.elapsed_s,
        }
        if self.mceq_mean is not None:
            d["mceq_mean"] = list(self.mceq_mean)
        return d


@dataclass
class _Bound:
    """Resolved experiment context shared by the runners."""

    cfg: ExperimentConfig
    code: DispersionCode
    nr: int
    constellation: Constellation
    profile: BlockProfile | None

    @property
    def bits_per_codeword(self) -> int:
        return self.code.l * self.constellation.bits_per_symbol


def bind(cfg: ExperimentConfig, require_structure: bool = False) -> _Bound:
    """Resolve the code reference and, for the tree decoders, its block
    profile (classified under a fixed internal stream so the profile never
    depends on the experiment seed).  Unstructured codes fall back to the
    trivial one-symbol-per-block profile, under which the structure-aware
    decoder degenerates to the plain one; require_structure rejects that."""
    code = resolve_code(cfg.code)
    nr = cfg.nr if cfg.nr is not None else default_nr(code)
    const = Constellation.pam(cfg.m)
    profile = None
    if cfg.decoder in ("trad", "simp"):
        result = classify_code(code, nr=nr, seed=0)
        profile = result.profile
        if profile is None:
            if require_structure:
                raise ExperimentError(
                    f"code {code.name} carries no block structure")
            profile = BlockProfile(n_blocks=code.l, units_per_block=1,
                                   unit_size=1)
    return _Bound(cfg=cfg, code=code, nr=nr, constellation=const, profile=profile)


def _indices_of_levels(constellation: Constellation, values: np.ndarray) -> np.ndarray:
    return np.abs(values[:, None] - constellation.levels[None, :]).argmin(axis=1)


def _run_point(bound: _Bound, snr_db: float, mc: int,
               decoder: str | None = None, trials: int | None = None,
               collect_mceq: bool = False, honor_max_errors: bool = True):
    """Monte Carlo at one (SNR, survivor budget) point.  Returns the record
    and, on request, the per-trial distinct-ancestor traces.  Substreams are
    keyed by the point values and the trial index only, so every decoder
    sees identical symbols, channels, and noise.  honor_max_errors=False
    disables the bit-error stopping rule (complexity statistics are not BER
    estimators and need the full trial count)."""
    cfg = bound.cfg
    decoder = cfg.decoder if decoder is None else decoder
    n_trials = cfg.trials if trials is None else trials
    max_errors = cfg.max_errors if honor_max_errors else None
    code, const = bound.code, bound.constellation
    snr = SnrPoint(snr_db)
    dec_cfg = DecoderConfig(mc=mc, constellation=const, profile=bound.profile)
    ml_cost = const.m ** code.l if decoder == "ml" else 0

    t0 = time.perf_counter()
    bit_errors = 0
    eval_total = 0
    mceq_sum = None
    traces = [] if collect_mceq else None
    trials_run = 0
    for trial in range(n_trials):
        # Keyed by trial only (not SNR, budget, or decoder): every operating
        # point sees identical symbols, channels, and noise, which makes
        # cross-point comparisons common-random-number smooth.
        rng = substream(cfg.seed, "trial", code.name, trial)
        idx = rng.integers(0, const.m, size=code.l)
        s = const.levels[idx]
        ch = sample_channel(code.nt, bound.nr, rng)
        h = equivalent_channel(code, ch)
        y = math.sqrt(snr.rho) * (h @ s)
        if not cfg.noiseless:
            y = y + rng.normal(0.0, math.sqrt(0.5), size=y.shape)

        if decoder == "ml":
            s_hat = decode_ml(h, y, snr.rho, const)
            idx_hat = _indices_of_levels(const, s_hat)
            eval_total += ml_cost
        else:
            decode = decode_traditional if decoder == "trad" else decode_simplified
            out = decode(h, y, snr.rho, dec_cfg)
            idx_hat = out.indices
            eval_total += out.metric_evals
            if mceq_sum is None:
                mceq_sum = np.zeros(len(out.mceq_per_stage))
            mceq_sum += out.mceq_per_stage
            if collect_mceq:
                traces.append(out.mceq_per_stage)

        bit_errors += const.bit_errors(idx, idx_hat)
        trials_run = trial + 1
        if max_errors is not None and bit_errors >= max_errors:
            break

    bits = trials_run * bound.bits_per_codeword
    lo, hi = wilson_interval(bit_errors, bits)
    record = ExperimentRecord(
        code=code.name, snr_db=snr_db, mc=mc, trials=trials_run,
        bit_errors=bit_errors, ber=bit_errors / bits,
        ber_ci_lo=lo, ber_ci_hi=hi,
        avg_metric_evals=eval_total / trials_run / code.t,
        decoder=decoder, seed=cfg.seed,
        elapsed_s=time.perf_counter() - t0,
        mceq_mean=None if mceq_sum is None else tuple(mceq_sum / trials_run),
    )
    return record, traces


def run_ber_sweep(cfg: ExperimentConfig, points=None, on_record=None) -> list:
    """BER and average complexity over the (snr_db x mc) grid.

    `points` restricts the run to the listed (snr_db, mc) pairs, which is how
    an interrupted sweep resumes: per-point substreams are keyed by the point
    values, so a filtered rerun reproduces the missing records exactly.
    `on_record` is called after each completed point (incremental output).
    """
    bound = bind(cfg)
    if points is None:
        points = [(s, c) for s in cfg.snr_db for c in cfg.mc]
    records = []
    for snr_db, mc in points:
        record, _ = _run_point(bound, float(snr_db), int(mc))
        records.append(record)
        if on_record is not None:
            on_record(record)
    return records


def run_mceq_stats(cfg: ExperimentConfig) -> dict:
    """Per-stage averages of the distinct-ancestor counts of the
    structure-aware decoder, with their ratios to the survivor budget."""
    if cfg.decoder != "simp":
        raise ExperimentError("shared-path statistics need decoder='simp'")
    bound = bind(cfg, require_structure=True)
    profile = bound.profile
    rows = []
    for snr_db in cfg.snr_db:
        for mc in cfg.mc:
            record, traces = _run_point(bound, snr_db, mc, collect_mceq=True,
                                        honor_max_errors=False)
            means = np.asarray(record.mceq_mean)
            rows.append({
                "snr_db": snr_db, "mc": mc, "trials": record.trials,
                "mceq_mean": [float(v) for v in means],
                "mceq_over_mc": [float(v / mc) for v in means],
                "avg_metric_evals": record.avg_metric_evals,
            })
    return {
        "code": bound.code.name,
        "profile": profile.as_tuple(),
        "unit_size": profile.unit_size,
        "stages_per_block": profile.units_per_block,
        "rows": rows,
    }


def run_complexity_comparison(cfg: ExperimentConfig) -> list:
    """Average evaluation counts of plain vs structure-aware decoding per
    survivor budget.  The plain count is deterministic, so the closed form is
    reported alongside a single measured run; the shared count is the Monte
    Carlo mean of the per-trial counters."""
    bound = bind(replace(cfg, decoder="simp"))
    profile = bound.profile
    gamma = profile.unit_size
    m_unit = bound.constellation.m ** gamma
    stages = bound.code.l // gamma
    rows = []
    for snr_db in cfg.snr_db:
        for mc in cfg.mc:
            record, _ = _run_point(bound, snr_db, mc, decoder="simp",
                                   honor_max_errors=False)
            formula = complexity_traditional(stages, m_unit, mc, bound.code.t)
            trad_record, _ = _run_point(bound, snr_db, mc, decoder="trad",
                                        trials=1, honor_max_errors=False)
            rows.append({
                "snr_db": snr_db, "mc": mc, "trials": record.trials,
                "traditional_formula": formula,
                "traditional_measured": trad_record.avg_metric_evals,
                "simplified_measured": record.avg_metric_evals,
                "ratio": record.avg_metric_evals / formula if formula else 1.0,
                "reduction_bound": reduction_bound(
                    profile.units_per_block, bound.constellation.m, gamma),
            })
    return rows


def run_ber_vs_complexity(cfg: ExperimentConfig, saturation_factor: float = 1.05) -> dict:
    """(complexity, BER) pairs over the survivor-budget sweep at fixed SNR,
    plus the saturation point: the smallest budget whose BER is within
    `saturation_factor` of the largest budget's BER."""
    if len(cfg.mc) < 2 or max(cfg.mc) < 10 * min(cfg.mc):
        raise ExperimentError("survivor budget sweep should span at least a decade")
    records = run_ber_sweep(cfg)
    series = {}
    for snr_db in cfg.snr_db:
        pts = sorted((r for r in records if r.snr_db == snr_db), key=lambda r: r.mc)
        floor = pts[-1].ber
        saturation = None
        for r in pts:
            if r.ber <= saturation_factor * floor or r.ber == floor:
                saturation = r.mc
                break
        series[snr_db] = {
            "points": [r.as_dict() for r in pts],
            "saturation_mc": saturation,
            "floor_ber": floor,
        }
    return {"code": cfg.code, "decoder": cfg.decoder, "series": series}


def run_classification(code_refs, nr: int | None = None, n_draws: int = 16,
                       tol: float = 1e-8, seed: int = 0) -> list:
    """Classify a list of code references into block profiles with
    certificates; deterministic for a given seed."""
    out = []
    for ref in code_refs:
        code = resolve_code(ref)
        result = classify_code(code, nr=nr, n_draws=n_draws, tol=tol, seed=seed)
        out.append(result.as_dict())
    return out


def run_decode_demo(cfg: ExperimentConfig, snr_db: float | None = None,
                    mc: int | None = None) -> dict:
    """One transmission plus decode, reported in full detail."""
    bound = bind(cfg)
    snr_db = cfg.snr_db[0] if snr_db is None else snr_db
    mc = cfg.mc[0] if mc is None else mc
    code, const = bound.code, bound.constellation
    snr = SnrPoint(snr_db)
    rng = substream(cfg.seed, "demo", code.name, repr(float(snr_db)), mc)
    idx = rng.integers(0, const.m, size=code.l)
    s = const.levels[idx]
    ch = sample_channel(code.nt, bound.nr, rng)
    h = equivalent_channel(code, ch)
    y = math.sqrt(snr.rho) * (h @ s)
    if not cfg.noiseless:
        y = y + rng.normal(0.0, math.sqrt(0.5), size=y.shape)

    if cfg.decoder == "ml":
        s_hat = decode_ml(h, y, snr.rho, const)
        idx_hat = _indices_of_levels(const, s_hat)
        detail = {"metric_evals": const.m ** code.l / code.t}
    else:
        decode = decode_traditional if cfg.decoder == "trad" else decode_simplified
        out = decode(h, y, snr.rho,
                     DecoderConfig(mc=mc, constellation=const, profile=bound.profile))
        idx_hat = out.indices
        detail = {
            "metric": out.metric,
            "metric_evals": out.metric_evals / code.t,
            "metric_evals_raw": out.metric_evals_raw / code.t,
            "mceq_per_stage": list(out.mceq_per_stage),
            "survivors_per_stage": list(out.survivors_per_stage),
        }
    return {
        "code": code.name, "decoder": cfg.decoder, "snr_db": snr_db, "mc": mc,
        "sent_indices": [int(v) for v in idx],
        "decided_indices": [int(v) for v in idx_hat],
        "bit_errors": const.bit_errors(idx, idx_hat),
        **detail,
    }


def records_to_csv(records, header: bool = True) -> str:
    lines = [CSV_HEADER] if header else []
    lines.extend(r.csv_row() for r in records)
    return "\n".join(lines) + "\n"


def parse_csv_points(text: str) -> set:
    """(snr_db, mc) pairs already present in a sweep CSV, for resumption."""
    done = set()
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        return done
    start = 1 if lines[0].startswith("code,") else 0
    for line in lines[start:]:
        parts = line.split(",")
        if len(parts) >= 3:
            done.add((float(parts[1]), int(parts[2])))
    return done
