"""End-to-end checks of the command-line front end.

Every invocation goes through cli.main(argv) so the argument parsing, the
error-to-exit-code mapping, and the report writers are all on the hook.
"""

import json

import numpy as np
import pytest

from conftest import make_dataset

from bpcure import __version__
from bpcure.cli import DEFAULT_SEED, load_csv, main
from bpcure.errors import (
    EmptyFileError,
    MissingColumnError,
    NonNumericError,
)


def write_csv(path, text):
    path.write_text(text)
    return str(path)


def dataset_csv(path, data):
    """Serialize a SurvivalDataset the way the CLI expects to read one."""
    cov_names = data.names[1:]
    lines = [",".join(["time", "status"] + cov_names)]
    for i in range(data.n):
        cells = [repr(float(data.t[i])), str(int(data.delta[i]))]
        cells += [repr(float(v)) for v in data.X[i, 1:]]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def parse_table(text):
    """Split a CSV report into (meta dict, header, value rows)."""
    lines = text.strip().split("\n")
    meta = {}
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        stripped = line[1:].strip()
        if ":" in stripped:
            key, _, value = stripped.partition(":")
            meta[key.strip()] = value.strip()
        else:
            meta["banner"] = stripped
    header = lines[body_start].split(",")
    rows = [line.split(",") for line in lines[body_start + 1 :]]
    return meta, header, rows


@pytest.fixture(scope="module")
def data_csv(tmp_path_factory):
    data = make_dataset(120, 0, 11)
    return dataset_csv(tmp_path_factory.mktemp("cli") / "sample.csv", data)


class TestLoadCsv:
    def test_three_clean_rows_one_covariate(self, tmp_path):
        path = write_csv(
            tmp_path / "a.csv",
            "time,status,nodule\n1.5,1,2\n2.0,0,3\n0.7,1,1\n",
        )
        data = load_csv(path)
        assert data.n == 3
        assert data.X.shape == (3, 2)
        assert data.names == ["intercept", "nodule"]
        np.testing.assert_array_equal(data.X[:, 0], 1.0)
        np.testing.assert_array_equal(data.X[:, 1], [2.0, 3.0, 1.0])
        np.testing.assert_array_equal(data.t, [1.5, 2.0, 0.7])
        np.testing.assert_array_equal(data.delta, [1.0, 0.0, 1.0])

    def test_wide_schema_loads_with_six_covariates(self, tmp_path):
        header = "time,status,treatment,age,nodule,sex,ps,tumor"
        rng = np.random.default_rng(5)
        lines = [header]
        for i in range(12):
            lines.append(",".join([
                repr(round(float(rng.uniform(0.2, 9.0)), 3)),
                str(i % 2),
                str(int(rng.integers(0, 2))),
                repr(round(float(rng.uniform(30, 70)), 1)),
                str(int(rng.integers(1, 5))),
                str(int(rng.integers(0, 2))),
                str(int(rng.integers(0, 2))),
                repr(round(float(rng.uniform(0.5, 6.0)), 2)),
            ]))
        path = write_csv(tmp_path / "wide.csv", "\n".join(lines) + "\n")
        data = load_csv(path)
        assert data.n == 12
        assert data.X.shape[1] == 7
        assert data.names == [
            "intercept", "treatment", "age", "nodule", "sex", "ps", "tumor",
        ]

    def test_column_order_does_not_matter(self, tmp_path):
        path = write_csv(
            tmp_path / "o.csv", "x1,status,time\n2.0,1,1.5\n3.0,0,2.5\n"
        )
        data = load_csv(path)
        np.testing.assert_array_equal(data.t, [1.5, 2.5])
        assert data.names == ["intercept", "x1"]

    def test_missing_status_column(self, tmp_path):
        path = write_csv(tmp_path / "m.csv", "time,nodule\n1.0,2\n")
        with pytest.raises(MissingColumnError, match="status"):
            load_csv(path)

    def test_status_two_names_the_line(self, tmp_path):
        path = write_csv(
            tmp_path / "s.csv", "time,status\n1.0,1\n2.0,2\n"
        )
        with pytest.raises(NonNumericError, match="line 3"):
            load_csv(path)

    def test_non_numeric_cell_names_line_and_column(self, tmp_path):
        path = write_csv(
            tmp_path / "n.csv", "time,status,x\n1.0,1,0.5\n2.0,1,oops\n"
        )
        with pytest.raises(NonNumericError, match="line 3.*'x'"):
            load_csv(path)

    def test_missing_value_names_line(self, tmp_path):
        path = write_csv(
            tmp_path / "b.csv", "time,status,x\n1.0,1,\n"
        )
        with pytest.raises(NonNumericError, match="line 2"):
            load_csv(path)

    def test_ragged_row_rejected(self, tmp_path):
        path = write_csv(
            tmp_path / "r.csv", "time,status,x\n1.0,1,0.5,9.9\n"
        )
        with pytest.raises(NonNumericError, match="expected 3 fields"):
            load_csv(path)

    def test_empty_file(self, tmp_path):
        path = write_csv(tmp_path / "e.csv", "")
        with pytest.raises(EmptyFileError):
            load_csv(path)

    def test_header_only_file(self, tmp_path):
        path = write_csv(tmp_path / "h.csv", "time,status\n")
        with pytest.raises(EmptyFileError):
            load_csv(path)

    def test_absent_file(self, tmp_path):
        with pytest.raises(EmptyFileError):
            load_csv(str(tmp_path / "nope.csv"))


class TestExitCodes:
    def test_missing_column_is_3(self, tmp_path, capsys):
        path = write_csv(tmp_path / "m.csv", "time,nodule\n1.0,2\n")
        code = main(["fit", "--input", path])
        assert code == 3
        assert capsys.readouterr().err.startswith("error:")

    def test_non_numeric_is_4(self, tmp_path, capsys):
        path = write_csv(tmp_path / "n.csv", "time,status\n1.0,2\n")
        assert main(["fit", "--input", path]) == 4
        assert "line 2" in capsys.readouterr().err

    def test_empty_file_is_5(self, tmp_path, capsys):
        path = write_csv(tmp_path / "e.csv", "")
        assert main(["fit", "--input", path]) == 5
        capsys.readouterr()

    def test_degenerate_data_is_6(self, tmp_path, capsys):
        path = write_csv(
            tmp_path / "d.csv",
            "time,status\n" + "".join(f"{v}.0,0\n" for v in range(1, 9)),
        )
        assert main(["fit", "--input", path]) == 6
        capsys.readouterr()

    def test_unknown_family_is_11(self, data_csv, capsys):
        assert main(["fit", "--input", data_csv, "--family", "zzz"]) == 11
        capsys.readouterr()

    def test_unknown_group_is_11(self, data_csv, capsys):
        code = main(["km", "--input", data_csv, "--group-by", "zzz", "--seed", "3"])
        assert code == 11
        capsys.readouterr()

    def test_unachievable_target_is_10(self, tmp_path, capsys):
        code = main([
            "simulate", "--mu", "0.5", "--phi", "1.0", "--alpha", "2.0",
            "--beta", "0.5,-1.0", "--target-censoring", "20.0",
            "--n", "50", "--reps", "1", "--seed", "0",
            "--output", str(tmp_path / "t.csv"),
        ])
        assert code == 10
        capsys.readouterr()

    def test_simulate_without_window_is_11(self, tmp_path, capsys):
        code = main([
            "simulate", "--mu", "0.5", "--phi", "1.0", "--alpha", "2.0",
            "--beta", "0.5,-1.0", "--n", "50", "--reps", "1",
            "--output", str(tmp_path / "t.csv"),
        ])
        assert code == 11
        capsys.readouterr()


class TestFitCommand:
    def test_json_report_fields(self, data_csv, tmp_path):
        out = tmp_path / "fit.json"
        code = main([
            "fit", "--input", data_csv, "--seed", "3", "--output", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["command"] == "fit"
        assert report["version"] == __version__
        assert report["seed"] == 3
        assert report["family"] == "nbbp"
        assert report["n"] == 120 and report["k"] == 5
        assert report["converged"] is True
        assert report["estimates"]["mu"] > 0
        assert report["estimates"]["phi"] > 0
        assert set(report["estimates"]["beta"]) == {"intercept", "x1"}
        assert report["aic"] == pytest.approx(
            2 * 5 - 2 * report["loglik"], rel=1e-12
        )
        for row in report["wald"].values():
            assert 0.0 <= row["p"] <= 1.0

    def test_mbp_family_pins_alpha(self, data_csv, tmp_path):
        out = tmp_path / "mbp.json"
        code = main([
            "fit", "--input", data_csv, "--family", "mbp",
            "--seed", "3", "--output", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["fixed_alpha"] == -1.0
        assert report["estimates"]["alpha"] == -1.0
        assert report["se"]["alpha"] is None
        assert report["k"] == 4

    def test_rerun_is_byte_identical(self, data_csv, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert main([
                "fit", "--input", data_csv, "--seed", "3", "--output", str(out),
            ]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_stdout_when_no_output(self, data_csv, capsys):
        assert main(["fit", "--input", data_csv, "--seed", "3"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["command"] == "fit"


class TestCompareCommand:
    def test_ranking_matches_single_fits(self, data_csv, tmp_path):
        fit_out = tmp_path / "nbbp.json"
        mbp_out = tmp_path / "mbp.json"
        cmp_out = tmp_path / "cmp.json"
        main(["fit", "--input", data_csv, "--seed", "3", "--output", str(fit_out)])
        main(["fit", "--input", data_csv, "--family", "mbp", "--seed", "3",
              "--output", str(mbp_out)])
        code = main([
            "compare", "--input", data_csv, "--families", "nbbp,mbp",
            "--seed", "3", "--output", str(cmp_out),
        ])
        assert code == 0
        report = json.loads(cmp_out.read_text())
        ranking = report["ranking"]
        assert [set(r) >= {"family", "aic", "bic", "delta_aic"} for r in ranking]
        assert ranking[0]["delta_aic"] == 0.0
        aics = {r["family"]: r["aic"] for r in ranking}
        single = {
            "nbbp": json.loads(fit_out.read_text())["aic"],
            "mbp": json.loads(mbp_out.read_text())["aic"],
        }
        for family, value in single.items():
            assert aics[family] == pytest.approx(value, rel=1e-12)
        assert ranking[0]["aic"] <= ranking[1]["aic"]

    def test_empty_family_list_is_11(self, data_csv, capsys):
        assert main([
            "compare", "--input", data_csv, "--families", ",", "--seed", "3",
        ]) == 11
        capsys.readouterr()


class TestInfluenceCommand:
    def test_curvature_table(self, data_csv, tmp_path):
        out = tmp_path / "infl.csv"
        code = main([
            "influence", "--input", data_csv, "--seed", "3",
            "--scheme", "caseweight", "--output", str(out),
        ])
        assert code == 0
        meta, header, rows = parse_table(out.read_text())
        assert meta["banner"] == f"bpcure {__version__}"
        assert meta["seed"] == "3"
        assert meta["scheme"] == "caseweight"
        assert header == ["case", "C", "flagged", "d_max"]
        assert len(rows) == 120
        cases = [int(r[0]) for r in rows]
        assert cases == list(range(1, 121))
        C = np.array([float(r[1]) for r in rows])
        assert np.all(C >= 0.0)
        flags = {r[2] for r in rows}
        assert flags <= {"0", "1"}
        threshold = float(meta["threshold"])
        np.testing.assert_allclose(threshold, 2.0 * C.mean(), rtol=1e-12)
        d = np.array([float(r[3]) for r in rows])
        assert abs(np.linalg.norm(d) - 1.0) < 1e-9

    def test_covariate_scheme_runs(self, data_csv, tmp_path):
        out = tmp_path / "cov.csv"
        code = main([
            "influence", "--input", data_csv, "--seed", "3",
            "--scheme", "covariate:x1", "--output", str(out),
        ])
        assert code == 0
        meta, _, rows = parse_table(out.read_text())
        assert meta["scheme"] == "covariate:x1"
        assert len(rows) == 120

    def test_deletion_rc_table(self, data_csv, tmp_path):
        out = tmp_path / "infl.csv"
        rc_out = tmp_path / "rc.csv"
        code = main([
            "influence", "--input", data_csv, "--seed", "3",
            "--scheme", "caseweight", "--output", str(out),
            "--drop", "3", "--rc-output", str(rc_out),
        ])
        assert code == 0
        meta, header, rows = parse_table(rc_out.read_text())
        assert header == ["cases", "parameter", "rc_estimate", "rc_se", "p"]
        assert [r[0] for r in rows] == ["3"] * 5
        labels = [r[1] for r in rows]
        assert labels == ["alpha", "mu", "phi", "beta[intercept]", "beta[x1]"]
        for row in rows:
            assert np.isfinite(float(row[2]))
            assert np.isfinite(float(row[3]))

    def test_one_based_drop_validation(self, data_csv, capsys):
        assert main([
            "influence", "--input", data_csv, "--seed", "3", "--drop", "0",
        ]) == 11
        capsys.readouterr()


class TestResidualsCommand:
    def test_qq_table(self, data_csv, tmp_path):
        out = tmp_path / "res.csv"
        code = main([
            "residuals", "--input", data_csv, "--seed", "3", "--output", str(out),
        ])
        assert code == 0
        meta, header, rows = parse_table(out.read_text())
        assert meta["seed"] == "3"
        assert header == [
            "case", "time", "status", "residual", "qq_theoretical", "qq_empirical",
        ]
        assert len(rows) == 120
        r = np.array([float(row[3]) for row in rows])
        qt = np.array([float(row[4]) for row in rows])
        qe = np.array([float(row[5]) for row in rows])
        assert np.all(np.isfinite(r))
        assert np.all(np.diff(qt) > 0)
        assert np.all(np.diff(qe) >= 0)

    def test_rerun_is_byte_identical(self, data_csv, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert main([
                "residuals", "--input", data_csv, "--seed", "9",
                "--output", str(out),
            ]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestKmCommand:
    def test_pooled_curve_and_overlay(self, data_csv, tmp_path):
        out = tmp_path / "km.csv"
        code = main([
            "km", "--input", data_csv, "--seed", "3", "--output", str(out),
        ])
        assert code == 0
        meta, header, rows = parse_table(out.read_text())
        assert header == ["series", "group", "time", "survival", "at_risk"]
        km_rows = [r for r in rows if r[0] == "km"]
        model_rows = [r for r in rows if r[0] == "model"]
        assert km_rows and len(model_rows) == 200
        # the model overlay starts at survival one and never increases
        sf = np.array([float(r[3]) for r in model_rows])
        assert sf[0] == 1.0
        assert np.all(np.diff(sf) <= 1e-12)
        s_km = np.array([float(r[3]) for r in km_rows])
        assert np.all((0.0 <= s_km) & (s_km <= 1.0))

    def test_grouped_curves(self, data_csv, tmp_path):
        out = tmp_path / "km2.csv"
        code = main([
            "km", "--input", data_csv, "--seed", "3",
            "--group-by", "x1", "--output", str(out),
        ])
        assert code == 0
        meta, _, rows = parse_table(out.read_text())
        assert meta["group_by"] == "x1"
        groups = {r[1] for r in rows}
        assert groups == {"x1=0", "x1=1"}
        for series in ("km", "model"):
            for label in ("x1=0", "x1=1"):
                assert any(r[0] == series and r[1] == label for r in rows)


class TestSimulateCommand:
    def test_custom_parameters_report(self, tmp_path):
        out = tmp_path / "mc.csv"
        code = main([
            "simulate", "--mu", "0.5", "--phi", "1.0", "--alpha", "2.0",
            "--beta", "0.5,-1.0", "--window", "0.01,7.0",
            "--n", "80", "--reps", "2", "--seed", "3", "--output", str(out),
        ])
        assert code == 0
        meta, header, rows = parse_table(out.read_text())
        assert header == ["parameter", "true", "mean", "sd", "bias", "mse"]
        names = [r[0] for r in rows]
        assert names == ["mu", "phi", "alpha", "beta0", "beta1", "p00", "p01"]
        true = {r[0]: float(r[1]) for r in rows}
        assert true["mu"] == 0.5 and true["phi"] == 1.0 and true["alpha"] == 2.0
        assert meta["preset"] == "custom"
        assert int(meta["reps_used"]) + int(meta["failures"]) == 2
        assert 0.0 <= float(meta["censoring_pct"]) <= 100.0

    def test_preset_report_shape(self, tmp_path):
        out = tmp_path / "mc.csv"
        code = main([
            "simulate", "--preset", "table1-s1", "--n", "80", "--reps", "2",
            "--seed", "7", "--output", str(out),
        ])
        assert code == 0
        meta, _, rows = parse_table(out.read_text())
        assert meta["preset"] == "table1-s1"
        true = {r[0]: float(r[1]) for r in rows}
        assert true["mu"] == 0.5 and true["phi"] == 1.0 and true["alpha"] == 2.0
        for row in rows:
            assert np.isfinite(float(row[2]))

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert main([
                "simulate", "--preset", "table1-s1", "--n", "80", "--reps", "2",
                "--seed", "7", "--output", str(out),
            ]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_dumped_sample_round_trips_into_fit(self, tmp_path):
        dump = tmp_path / "sample.csv"
        out = tmp_path / "mc.csv"
        code = main([
            "simulate", "--preset", "table1-s1", "--n", "150", "--reps", "1",
            "--seed", "4", "--dump-sample", str(dump), "--output", str(out),
        ])
        assert code == 0
        data = load_csv(str(dump))
        assert data.n == 150
        assert data.names == ["intercept", "x1"]
        fit_out = tmp_path / "fit.json"
        code = main([
            "fit", "--input", str(dump), "--seed", "3", "--keep-going",
            "--output", str(fit_out),
        ])
        assert code == 0
        report = json.loads(fit_out.read_text())
        assert report["n"] == 150


class TestParserBasics:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_default_seed_lands_in_report(self, data_csv, tmp_path):
        out = tmp_path / "res.csv"
        assert main(["residuals", "--input", data_csv,
                     "--output", str(out)]) == 0
        meta, _, _ = parse_table(out.read_text())
        assert meta["seed"] == str(DEFAULT_SEED)
