import csv

import numpy as np
import pytest

from treataccel.cli import main

DESIGN = "1\nx_lci > 6\nx_disease\nphysical\ndial2yr != 0\n"


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One simulated cohort on disk plus design/accel files."""
    root = tmp_path_factory.mktemp("cli")
    (root / "design.txt").write_text(DESIGN)
    (root / "accel.txt").write_text("form=constant b=2\n")
    rc = main(["simulate", "--n", "250", "--seed", "9",
               "--out", str(root / "c")])
    assert rc == 0
    return root


def test_simulate_outputs_and_determinism(workspace, tmp_path):
    for suffix in ("_baseline.csv", "_events.csv", "_meta.json"):
        assert (workspace / ("c" + suffix)).exists()
    header, rows = read_csv(workspace / "c_baseline.csv")
    assert header[0] == "subject_id"
    assert len(rows) == 250

    assert main(["simulate", "--n", "250", "--seed", "9",
                 "--out", str(tmp_path / "d")]) == 0
    for suffix in ("_baseline.csv", "_events.csv"):
        a = (workspace / ("c" + suffix)).read_bytes()
        b = (tmp_path / ("d" + suffix)).read_bytes()
        assert a == b


def test_fit_treatment_table(workspace, tmp_path):
    out = tmp_path / "coeffs.csv"
    rc = main(["fit-treatment", "--input", str(workspace / "c"),
               "--design", str(workspace / "design.txt"),
               "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert header == ["time", "term", "increment", "cumulative",
                      "rank_skipped"]
    terms = sorted({r[1] for r in rows})
    assert terms == sorted(["1", "x_lci > 6", "x_disease", "physical",
                            "dial2yr != 0"])
    # running sum of increments reproduces the cumulative column
    inc = [float(r[2]) for r in rows if r[1] == "1"]
    cum = [float(r[3]) for r in rows if r[1] == "1"]
    np.testing.assert_allclose(np.cumsum(inc), cum, atol=1e-10)
    assert set(r[4] for r in rows) <= {"0", "1"}


def test_estimate_matches_oracle_for_observational_data(workspace, tmp_path):
    est = tmp_path / "est.csv"
    orc = tmp_path / "orc.csv"
    grid = "0.5:9.5:1.5"
    assert main(["estimate", "--input", str(workspace / "c"),
                 "--design", str(workspace / "design.txt"),
                 "--grid", grid, "--out", str(est)]) == 0
    # the oracle subcommand resimulates the same observational world
    assert main(["oracle", "--n", "250", "--seed", "9", "--grid", grid,
                 "--out", str(orc)]) == 0
    _, erows = read_csv(est)
    _, orows = read_csv(orc)
    assert [r[0] for r in erows] == [r[0] for r in orows]
    assert [r[1] for r in erows] == [r[1] for r in orows]
    assert all(r[2] == "" and r[3] == "" for r in erows)


def test_estimate_with_bootstrap_band(workspace, tmp_path):
    out = tmp_path / "band.csv"
    rc = main(["estimate", "--input", str(workspace / "c"),
               "--design", str(workspace / "design.txt"),
               "--accel", str(workspace / "accel.txt"),
               "--grid", "1:8:3.5", "--bootstrap", "20", "--seed", "4",
               "--out", str(out)])
    assert rc == 0
    _, rows = read_csv(out)
    for r in rows:
        lo, mid, hi = float(r[2]), float(r[1]), float(r[3])
        assert lo <= mid <= hi
        assert r[4] == "constant b=2"


def test_weights_table(workspace, tmp_path):
    out = tmp_path / "w.csv"
    rc = main(["weights", "--input", str(workspace / "c"),
               "--design", str(workspace / "design.txt"),
               "--accel", str(workspace / "accel.txt"),
               "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert header == ["subject_id", "time", "weight"]
    assert all(float(r[2]) > 0 for r in rows)


def test_residuals_table(workspace, tmp_path):
    out = tmp_path / "resid.csv"
    rc = main(["residuals", "--input", str(workspace / "c"),
               "--design", str(workspace / "design.txt"),
               "--strata", "dial2yr != 0", "--grid", "1:9:2",
               "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert header == ["time", "stratum", "mean"]
    assert {r[1] for r in rows} == {"dial2yr != 0=0", "dial2yr != 0=1"}
    assert len(rows) == 10


def test_validate_timechange_row(tmp_path):
    out = tmp_path / "chk.csv"
    rc = main(["validate-timechange", "--lambda", "1", "--accel",
               "form=constant b=2", "--horizon", "1", "--paths", "400",
               "--seed", "3", "--out", str(out)])
    assert rc == 0
    header, rows = read_csv(out)
    assert "empirical_mean" in header and "ok" in header
    assert len(rows) == 1
    assert rows[0][header.index("ok")] == "1"
    assert rows[0][header.index("predicted")] == "2"


def test_float_formatting_is_compact(workspace, tmp_path):
    out = tmp_path / "est.csv"
    main(["estimate", "--input", str(workspace / "c"),
          "--design", str(workspace / "design.txt"),
          "--grid", "0:10:2.5", "--out", str(out)])
    _, rows = read_csv(out)
    assert rows[0][0] == "0"
    assert rows[1][0] == "2.5"
    for r in rows:
        assert len(r[1]) <= 18      # %.12g keeps numbers short


class TestErrorHandling:

    def test_missing_input(self, workspace, tmp_path, capsys):
        rc = main(["estimate", "--input", str(tmp_path / "ghost"),
                   "--design", str(workspace / "design.txt"),
                   "--grid", "0:10:1", "--out", str(tmp_path / "x.csv")])
        assert rc == 1
        err = capsys.readouterr().err
        assert err.startswith("error: estimate: input file not found")
        assert err.strip().count("\n") == 0

    def test_bad_grid(self, workspace, tmp_path, capsys):
        rc = main(["estimate", "--input", str(workspace / "c"),
                   "--design", str(workspace / "design.txt"),
                   "--grid", "backwards", "--out", str(tmp_path / "x.csv")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error: estimate:")

    def test_bootstrap_requires_seed(self, workspace, tmp_path, capsys):
        rc = main(["estimate", "--input", str(workspace / "c"),
                   "--design", str(workspace / "design.txt"),
                   "--grid", "0:10:1", "--bootstrap", "10",
                   "--out", str(tmp_path / "x.csv")])
        assert rc == 1
        assert "--seed is required" in capsys.readouterr().err

    def test_bad_accel_spec(self, workspace, tmp_path, capsys):
        rc = main(["weights", "--input", str(workspace / "c"),
                   "--design", str(workspace / "design.txt"),
                   "--accel", "form=constant", "--out",
                   str(tmp_path / "x.csv")])
        assert rc == 1
        assert "missing b=" in capsys.readouterr().err

    def test_unknown_subcommand_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_flag_exits_two(self, workspace):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--n", "10", "--seed", "1", "--out", "x",
                  "--bogus"])
        assert exc.value.code == 2
