import json

import numpy as np
import pytest

from pdlab.cli import main


@pytest.fixture
def bulk_family(tmp_path):
    path = tmp_path / "bulk.json"
    path.write_text(json.dumps({"kind": "bulk_tail", "theta": 1.0, "A": 1, "bulk": [0.5, 0.5]}))
    return str(path)


def run(*argv):
    return main(list(argv))


class TestZn:
    def test_writes_cache_and_csv(self, tmp_path, bulk_family):
        out = tmp_path / "out"
        assert run("--family", bulk_family, "--out", str(out), "zn", "--L", "8", "--N", "12") == 0
        csvs = list(out.glob("zn_*.csv"))
        caches = list(out.glob("logz_*.npy"))
        assert len(csvs) == 1 and len(caches) == 1
        body = csvs[0].read_text()
        assert body.startswith("# pdlab")
        assert '"command": "zn"' in body

    def test_byte_identical_rerun(self, tmp_path, bulk_family):
        a, b = tmp_path / "a", tmp_path / "b"
        run("--family", bulk_family, "--out", str(a), "zn", "--L", "6", "--N", "9")
        run("--family", bulk_family, "--out", str(b), "zn", "--L", "6", "--N", "9")
        fa = next(a.glob("zn_*.csv")).read_bytes()
        fb = next(b.glob("zn_*.csv")).read_bytes()
        assert fa == fb
        na = next(a.glob("logz_*.npy")).read_bytes()
        nb = next(b.glob("logz_*.npy")).read_bytes()
        assert na == nb

    def test_bad_L_is_config_error(self, tmp_path, bulk_family):
        assert run("--family", bulk_family, "--out", str(tmp_path), "zn", "--L", "0", "--N", "5") == 2

    def test_missing_family_is_config_error(self, tmp_path):
        assert run("--out", str(tmp_path), "zn", "--L", "2", "--N", "2") == 2


class TestSample:
    def test_seed_reproducibility(self, tmp_path, bulk_family):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            run("--family", bulk_family, "--seed", "11", "--out", str(out),
                "sample", "--L", "4", "--N", "6", "--count", "20")
        assert (a / "configurations.txt").read_bytes() == (b / "configurations.txt").read_bytes()

    def test_zero_mass_writes_all_zero_rows(self, tmp_path, bulk_family):
        out = tmp_path / "o"
        run("--family", bulk_family, "--out", str(out), "sample", "--L", "3", "--N", "0", "--count", "4")
        rows = [
            line for line in (out / "configurations.txt").read_text().splitlines()
            if line and not line.startswith("#")
        ]
        assert rows == ["0 0 0"] * 4

    def test_count_matches(self, tmp_path, bulk_family):
        out = tmp_path / "o"
        run("--family", bulk_family, "--out", str(out), "sample", "--L", "4", "--N", "7", "--count", "13")
        rows = [
            line for line in (out / "configurations.txt").read_text().splitlines()
            if line and not line.startswith("#")
        ]
        assert len(rows) == 13
        assert all(sum(map(int, r.split())) == 7 for r in rows)


class TestSplitMerge:
    def test_mass_column_constant(self, tmp_path):
        out = tmp_path / "o"
        run("--seed", "2", "--out", str(out), "splitmerge", "--theta", "1.0",
            "--t-max", "8", "--records", "8")
        rows = (out / "trajectory.csv").read_text().splitlines()
        header = rows[2].split(",")
        assert header == ["time", "p1", "p2", "p3", "l2sq", "merges", "splits"]
        for line in rows[3:]:
            parts = line.split(",")
            l2sq = float(parts[4])
            assert 0.0 < l2sq <= 1.0 + 1e-12

    def test_theta_zero_absorbs(self, tmp_path):
        out = tmp_path / "o"
        run("--seed", "3", "--out", str(out), "splitmerge", "--theta", "0.0",
            "--t-max", "50", "--records", "2", "--p0", "[0.5, 0.5]")
        last = (out / "trajectory.csv").read_text().splitlines()[-1].split(",")
        assert float(last[1]) == pytest.approx(1.0, abs=1e-12)
        assert int(last[6]) == 0

    def test_seed_reproducibility(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            run("--seed", "4", "--out", str(out), "splitmerge", "--theta", "0.7",
                "--t-max", "5", "--records", "5")
            outs.append((out / "trajectory.csv").read_bytes())
        assert outs[0] == outs[1]


class TestReversibility:
    def test_f_equals_g_zero_row(self, tmp_path, bulk_family):
        out = tmp_path / "o"
        run("--family", bulk_family, "--out", str(out), "reversibility", "--theta", "0.5",
            "--eps", "0.2", "--sizes", "3:6", "--mode", "exact", "--f", "p1", "--g", "p1")
        doc = json.loads((out / "reversibility.json").read_text())
        assert doc["result"][0]["defect"] == 0.0
        assert doc["result"][0]["mode"] == "exact"

    def test_exact_mc_cross_validation(self, tmp_path, bulk_family):
        out = tmp_path / "o"
        run("--family", bulk_family, "--seed", "5", "--out", str(out), "reversibility",
            "--theta", "0.5", "--eps", "0.2", "--sizes", "3:6", "--mode", "exact")
        exact = json.loads((out / "reversibility.json").read_text())["result"][0]["defect"]
        out2 = tmp_path / "o2"
        run("--family", bulk_family, "--seed", "5", "--out", str(out2), "reversibility",
            "--theta", "0.5", "--eps", "0.2", "--sizes", "3:6", "--mode", "mc",
            "--samples", "20000")
        mc = json.loads((out2 / "reversibility.json").read_text())["result"][0]
        assert abs(mc["defect"] - exact) < 3 * mc["se"]

    def test_schema_fields(self, tmp_path, bulk_family):
        out = tmp_path / "o"
        run("--family", bulk_family, "--out", str(out), "reversibility", "--theta", "1.0",
            "--eps", "0.25", "--sizes", "2:4,3:6", "--mode", "exact")
        rows = json.loads((out / "reversibility.json").read_text())["result"]
        assert len(rows) == 2
        for row in rows:
            assert {"L", "N", "eps", "theta", "f", "g", "defect", "se", "mode"} <= set(row)

    def test_unknown_function_rejected(self, tmp_path, bulk_family):
        code = run("--family", bulk_family, "--out", str(tmp_path), "reversibility",
                   "--theta", "1.0", "--eps", "0.1", "--sizes", "3:6", "--f", "nope")
        assert code == 2

    def test_bad_sizes_rejected(self, tmp_path, bulk_family):
        code = run("--family", bulk_family, "--out", str(tmp_path), "reversibility",
                   "--theta", "1.0", "--eps", "0.1", "--sizes", "3x6")
        assert code == 2


class TestEnsembles:
    def test_rows_per_size_and_phi_echo(self, tmp_path, bulk_family):
        out = tmp_path / "o"
        run("--family", bulk_family, "--out", str(out), "ensembles",
            "--rho", "0.25", "--sizes", "8,16,32")
        lines = (out / "ensembles.csv").read_text().splitlines()
        ent_rows = [l for l in lines if l.startswith("entropy_bound")]
        assert len(ent_rows) == 3
        # the inverted fugacity Phi(0.25) = 1/3 is echoed in each row
        assert all(abs(float(l.split(",")[3]) - 1 / 3) < 1e-6 for l in ent_rows)

    def test_explicit_phi_honoured(self, tmp_path, bulk_family):
        out = tmp_path / "o"
        run("--family", bulk_family, "--out", str(out), "ensembles",
            "--rho", "0.25", "--sizes", "8", "--phi", "0.4")
        lines = (out / "ensembles.csv").read_text().splitlines()
        row = next(l for l in lines if l.startswith("entropy_bound"))
        assert float(row.split(",")[3]) == 0.4


class TestNumericFailure:
    def test_supercritical_density_exits_3(self, tmp_path, bulk_family, capsys):
        # rho above the critical density has no limiting fugacity
        code = run("--family", bulk_family, "--out", str(tmp_path), "ensembles",
                   "--rho", "0.6", "--sizes", "8,16")
        assert code == 3
        err = capsys.readouterr().err
        assert json.loads(err.strip())["error"] == "numeric"


class TestZnCache:
    def test_rerun_reuses_cache(self, tmp_path, bulk_family):
        out = tmp_path / "o"
        run("--family", bulk_family, "--out", str(out), "zn", "--L", "5", "--N", "7")
        cache = next(out.glob("logz_*.npy"))
        stamp = cache.stat().st_mtime_ns
        run("--family", bulk_family, "--out", str(out), "zn", "--L", "5", "--N", "7")
        assert cache.stat().st_mtime_ns == stamp  # not rebuilt

    def test_cache_round_trip(self, tmp_path, bulk_family):
        from pdlab import WeightFamily, build_logz
        from pdlab.cli import load_logz_cache, save_logz_cache

        fam = WeightFamily.from_json(bulk_family)
        table = build_logz(fam, 6, 9)
        save_logz_cache(table, tmp_path)
        again = load_logz_cache(fam, 6, 9, tmp_path)
        assert again is not None
        assert np.allclose(again.logz, table.logz, equal_nan=True)
        assert load_logz_cache(WeightFamily.inclusion(1.0), 6, 9, tmp_path) is None


class TestCondense:
    def test_schema_and_target(self, tmp_path, bulk_family):
        out = tmp_path / "o"
        run("--family", bulk_family, "--out", str(out), "condense",
            "--rho", "2", "--theta", "1", "--sizes", "20,40")
        lines = (out / "condense.csv").read_text().splitlines()
        assert lines[2] == "quantity,L,N,eps,value"
        frac_rows = [l for l in lines if l.startswith("condensed_fraction")]
        assert len(frac_rows) == 2
        target = next(l for l in lines if l.startswith("alpha_target"))
        assert float(target.split(",")[4]) == pytest.approx(0.75)


class TestAssumptions:
    def test_report_written(self, tmp_path, bulk_family):
        out = tmp_path / "o"
        run("--family", bulk_family, "--out", str(out), "assumptions",
            "--L", "25", "--N", "50", "--eps", "0.1", "--J", "1")
        doc = json.loads((out / "assumptions.json").read_text())
        labels = {row["label"] for row in doc["result"]["series"]}
        assert "tail_sup_beyond_J" in labels
        assert doc["config"]["version"]
