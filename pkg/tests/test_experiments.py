
import numpy as np
import pytest

from stcsim import experiments as ex
from stcsim.decoders import complexity_traditional


class TestWilson:
    def test_empty(self):
        assert ex.wilson_interval(0, 0) == (0.0, 1.0)

    def test_contains_point_estimate(self):
        lo, hi = ex.wilson_interval(7, 100)
        assert lo < 0.07 < hi

    def test_degenerate_all_errors(self):
        lo, hi = ex.wilson_interval(50, 50)
        assert hi == 1.0 and lo > 0.9

    def test_zero_errors_positive_upper(self):
        lo, hi = ex.wilson_interval(0, 1000)
        assert lo == 0.0 and 0 < hi < 0.01


class TestConfig:
    def test_validation(self):
        with pytest.raises(ex.ExperimentError):
            ex.ExperimentConfig(code="alamouti", decoder="bogus")
        with pytest.raises(ex.ExperimentError):
            ex.ExperimentConfig(code="alamouti", trials=0)
        with pytest.raises(ex.ExperimentError):
            ex.ExperimentConfig(code="alamouti", mc=(0,))
        with pytest.raises(ex.ExperimentError):
            ex.ExperimentConfig(code="alamouti", snr_db=(float("inf"),))

    def test_bind_unknown_code(self):
        with pytest.raises(Exception):
            ex.bind(ex.ExperimentConfig(code="nope"))


class TestBerSweep:
    def test_reproducible(self):
        cfg = ex.ExperimentConfig(code="alamouti", m=2, decoder="ml",
                                  mc=(1,), snr_db=(2.0, 6.0), trials=400)
        a = ex.run_ber_sweep(cfg)
        b = ex.run_ber_sweep(cfg)
        assert [r.csv_row() for r in a] == [r.csv_row() for r in b]

    def test_resumable_split(self):
        cfg = ex.ExperimentConfig(code="alamouti", m=2, decoder="ml",
                                  mc=(1,), snr_db=(2.0, 6.0, 10.0), trials=300)
        full = ex.run_ber_sweep(cfg)
        part1 = ex.run_ber_sweep(cfg, points=[(2.0, 1)])
        part2 = ex.run_ber_sweep(cfg, points=[(6.0, 1), (10.0, 1)])
        assert [r.csv_row() for r in part1 + part2] == \
            [r.csv_row() for r in full]

    def test_zero_noise_zero_ber(self):
        cfg = ex.ExperimentConfig(code="dsttd", m=4, decoder="simp",
                                  mc=(4,), snr_db=(10.0,), trials=100,
                                  noiseless=True)
        rec = ex.run_ber_sweep(cfg)[0]
        assert rec.ber == 0.0 and rec.bit_errors == 0

    def test_trad_and_simp_identical_ber(self):
        base = dict(code="dsttd", m=4, mc=(8,), snr_db=(12.0,), trials=400)
        rt = ex.run_ber_sweep(ex.ExperimentConfig(decoder="trad", **base))[0]
        rs = ex.run_ber_sweep(ex.ExperimentConfig(decoder="simp", **base))[0]
        assert rt.ber == rs.ber and rt.bit_errors == rs.bit_errors
        assert rs.avg_metric_evals < rt.avg_metric_evals

    def test_traditional_complexity_is_closed_form(self):
        cfg = ex.ExperimentConfig(code="dsttd", m=4, decoder="trad",
                                  mc=(20,), snr_db=(10.0,), trials=50)
        rec = ex.run_ber_sweep(cfg)[0]
        assert rec.avg_metric_evals == complexity_traditional(8, 4, 20, 2)

    def test_early_stop(self):
        cfg = ex.ExperimentConfig(code="alamouti", m=2, decoder="ml",
                                  mc=(1,), snr_db=(0.0,), trials=100_000,
                                  max_errors=50)
        rec = ex.run_ber_sweep(cfg)[0]
        assert rec.bit_errors >= 50 and rec.trials < 100_000

    def test_on_record_callback(self):
        seen = []
        cfg = ex.ExperimentConfig(code="alamouti", m=2, decoder="ml",
                                  mc=(1,), snr_db=(0.0, 4.0), trials=50)
        ex.run_ber_sweep(cfg, on_record=seen.append)
        assert len(seen) == 2

    def test_csv_contract(self):
        cfg = ex.ExperimentConfig(code="alamouti", m=2, decoder="ml",
                                  mc=(1,), snr_db=(0.0,), trials=50)
        text = ex.records_to_csv(ex.run_ber_sweep(cfg))
        lines = text.strip().splitlines()
        assert lines[0] == ("code,snr_db,mc,trials,bit_errors,ber,ber_ci_lo,"
                            "ber_ci_hi,avg_metric_evals,decoder,seed")
        assert lines[1].startswith("alamouti,0.0,1,50,")
        assert ex.parse_csv_points(text) == {(0.0, 1)}


class TestMcEqStats:
    def test_single_path_ratios_are_one(self):
        cfg = ex.ExperimentConfig(code="dsttd", m=4, decoder="simp",
                                  mc=(1,), snr_db=(10.0,), trials=60)
        stats = ex.run_mceq_stats(cfg)
        row = stats["rows"][0]
        assert all(v == 1.0 for v in row["mceq_over_mc"])

    def test_shared_counts_shrink_with_depth(self):
        cfg = ex.ExperimentConfig(code="dsttd", m=8, decoder="simp",
                                  mc=(32,), snr_db=(14.0,), trials=400)
        stats = ex.run_mceq_stats(cfg)
        row = stats["rows"][0]
        second_block = row["mceq_over_mc"][4:]
        assert second_block[0] == pytest.approx(1.0)
        assert all(a >= b for a, b in zip(second_block, second_block[1:]))
        assert all(v < 1.0 for v in second_block[1:])

    def test_requires_simp(self):
        cfg = ex.ExperimentConfig(code="dsttd", decoder="trad")
        with pytest.raises(ex.ExperimentError):
            ex.run_mceq_stats(cfg)

    def test_unstructured_rejected(self, tmp_path):
        from stcsim.codes import DispersionCode, save_code

        gen = np.random.default_rng(9)
        mats = gen.normal(size=(8, 2, 4)) + 1j * gen.normal(size=(8, 2, 4))
        path = tmp_path / "dense.json"
        save_code(DispersionCode.from_matrices("dense", mats), path)
        cfg = ex.ExperimentConfig(code=str(path), decoder="simp",
                                  mc=(4,), snr_db=(10.0,), trials=10)
        with pytest.raises(ex.ExperimentError, match="no block structure"):
            ex.run_mceq_stats(cfg)

    def test_structured_shape(self):
        stats = ex.run_mceq_stats(ex.ExperimentConfig(
            code="golden", decoder="simp", mc=(4,), snr_db=(10.0,), trials=30))
        assert stats["profile"] == (4, 2, 1)
        assert len(stats["rows"][0]["mceq_mean"]) == 8


class TestComplexityComparison:
    def test_dsttd_rows(self):
        cfg = ex.ExperimentConfig(code="dsttd", m=4, decoder="simp",
                                  mc=(4, 16), snr_db=(14.0,), trials=200)
        rows = ex.run_complexity_comparison(cfg)
        assert len(rows) == 2
        for row in rows:
            assert row["traditional_measured"] == row["traditional_formula"]
            assert row["simplified_measured"] <= row["traditional_formula"]
            assert row["ratio"] <= 1.0
            assert row["ratio"] >= row["reduction_bound"] - 1e-12

    def test_unstructured_code_ratio_one(self, tmp_path):
        """Codes without sharable structure decode at exactly the plain cost."""
        from stcsim.codes import DispersionCode, save_code

        gen = np.random.default_rng(9)
        mats = gen.normal(size=(8, 2, 4)) + 1j * gen.normal(size=(8, 2, 4))
        dense = DispersionCode.from_matrices("dense", mats)
        path = tmp_path / "dense.json"
        save_code(dense, path)
        cfg = ex.ExperimentConfig(code=str(path), m=4, decoder="simp",
                                  mc=(4,), snr_db=(10.0,), trials=40)
        rows = ex.run_complexity_comparison(cfg)
        assert rows[0]["ratio"] == 1.0
        assert rows[0]["simplified_measured"] == rows[0]["traditional_formula"]


class TestBerVsComplexity:
    def test_saturation_found(self):
        cfg = ex.ExperimentConfig(code="dsttd", m=2, decoder="simp",
                                  mc=(1, 2, 4, 8, 16), snr_db=(10.0,),
                                  trials=800, max_errors=None)
        out = ex.run_ber_vs_complexity(cfg)
        series = out["series"][10.0]
        assert series["saturation_mc"] is not None
        bers = [p["ber"] for p in series["points"]]
        # common random numbers make the curve non-increasing up to noise
        assert bers[0] >= bers[-1]

    def test_needs_decade_span(self):
        cfg = ex.ExperimentConfig(code="dsttd", mc=(4, 8), snr_db=(10.0,),
                                  trials=10)
        with pytest.raises(ex.ExperimentError):
            ex.run_ber_vs_complexity(cfg)


class TestClassificationRunner:
    def test_table_rows(self):
        out = ex.run_classification(["blast(2)", "golden", "dsttd"])
        profiles = {r["code"]: (r["profile"]["n_blocks"],
                                r["profile"]["units_per_block"],
                                r["profile"]["unit_size"]) for r in out}
        assert profiles == {"blast(2)": (2, 2, 1), "golden": (4, 2, 1),
                            "dsttd": (2, 4, 1)}

    def test_deterministic(self):
        a = ex.run_classification(["dsttd"], seed=3)
        b = ex.run_classification(["dsttd"], seed=3)
        assert a == b


class TestDecodeDemo:
    def test_fields(self):
        cfg = ex.ExperimentConfig(code="dsttd", m=4, decoder="simp",
                                  mc=(8,), snr_db=(12.0,), trials=1)
        out = ex.run_decode_demo(cfg)
        assert out["code"] == "dsttd" and len(out["sent_indices"]) == 8
        assert "mceq_per_stage" in out and len(out["mceq_per_stage"]) == 8

    def test_noiseless_correct(self):
        cfg = ex.ExperimentConfig(code="alamouti", m=4, decoder="trad",
                                  mc=(4,), snr_db=(10.0,), trials=1,
                                  noiseless=True)
        out = ex.run_decode_demo(cfg)
        assert out["bit_errors"] == 0
        assert out["sent_indices"] == out["decided_indices"]
