import csv
import io
import json
import math
import subprocess
import sys

import pytest

from imimo.cli import main
from imimo.errors import InvalidArgumentError
from imimo.sweep import (
    SweepSpec,
    THREADS_ENV,
    csv_header,
    default_threads,
    format_number,
    parse_sweep_config,
)
from imimo.model import db_to_linear, linear_to_db

BASE = ["--n", "2", "--rate", "2"]


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def record(text):
    return dict(line.split("=", 1) for line in text.strip().splitlines())


class TestOutage:
    def test_single_round_arq(self):
        code, text = run("outage", "--scheme", "arq", "--l", "1", "--powers", "10", "--method", "exact", *BASE)
        assert code == 0
        rec = record(text)
        assert float(rec["p_out_1"]) == pytest.approx(0.0369363131, abs=1e-10)
        assert float(rec["avg_energy"]) == 10.0

    def test_cc_two_rounds_json(self):
        code, text = run("outage", "--scheme", "cc", "--n", "1", "--l", "2", "--rate", "2",
                         "--powers", "10,10", "--json")
        assert code == 0
        rec = json.loads(text)
        assert rec["p_out_2"] == pytest.approx(0.0369363131, abs=1e-10)
        assert set(rec) >= {"p_out_1", "p_out_2", "avg_energy", "powers"}

    def test_asymptotic_method(self):
        code, text = run("outage", "--scheme", "cc", "--l", "2", "--powers", "100,100",
                         "--method", "asymptotic", *BASE)
        assert code == 0
        assert float(record(text)["p_out_2"]) == pytest.approx(3.375e-8, rel=1e-12)

    def test_power_count_mismatch(self, capsys):
        code, _ = run("outage", "--scheme", "cc", "--l", "3", "--powers", "1,2", *BASE)
        assert code == 2
        err = capsys.readouterr().err
        assert "2 powers" in err and "L = 3" in err

    @pytest.mark.parametrize("powers", ["1,,2", "a,b", "1,-2", "nan"])
    def test_malformed_powers(self, powers):
        assert run("outage", "--scheme", "cc", "--l", "2", "--powers", powers, *BASE)[0] == 2

    def test_missing_flag(self):
        assert run("outage", "--scheme", "cc", "--l", "2", "--n", "2", "--powers", "1,2")[0] == 2

    def test_unknown_scheme(self):
        assert run("outage", "--scheme", "fec", "--l", "1", "--powers", "1", *BASE)[0] == 2

    def test_ir_cap(self):
        assert run("outage", "--scheme", "ir", "--l", "4", "--powers", "1,1,1,1", *BASE)[0] == 2


class TestOptimize:
    def test_gpp_worked_instance(self):
        code, text = run("optimize", "--method", "gpp", "--scheme", "arq", "--l", "2",
                         "--energy", "10", *BASE)
        assert code == 0
        p1, p2 = (float(v) for v in record(text)["powers"].split(","))
        assert p1 == pytest.approx(7.5, abs=1e-12)
        assert p2 == pytest.approx(31.25, abs=1e-12)

    @pytest.mark.parametrize("scheme", ["arq", "cc", "ir"])
    def test_single_round_gpp_and_epa(self, scheme):
        outs = []
        for method in ("gpp", "epa"):
            code, text = run("optimize", "--method", method, "--scheme", scheme, "--l", "1",
                             "--energy-db", "10", "--json", *BASE)
            assert code == 0
            outs.append(json.loads(text)["powers"])
        assert outs[0] == pytest.approx([10.0], rel=1e-14)
        assert outs[0] == outs[1]

    def test_ir_exact_cap(self, capsys):
        code, _ = run("optimize", "--method", "exact", "--scheme", "ir", "--l", "4",
                      "--energy", "10", *BASE)
        assert code == 2
        assert "3" in capsys.readouterr().err

    def test_budget_required(self):
        assert run("optimize", "--method", "gpp", "--scheme", "cc", "--l", "2", *BASE)[0] == 2

    def test_bad_budget(self):
        assert run("optimize", "--method", "gpp", "--scheme", "cc", "--l", "2",
                   "--energy", "-1", *BASE)[0] == 2

    def test_not_converged_exit_code(self, monkeypatch):
        import dataclasses

        import imimo.cli as cli

        real = cli.solve

        def fake(config, method, **kw):
            return dataclasses.replace(real(config, "gpp"), converged=False)

        monkeypatch.setattr(cli, "solve", fake)
        code, text = run("optimize", "--method", "exact", "--scheme", "cc", "--l", "2",
                         "--energy", "10", *BASE)
        assert code == 3
        assert record(text)["converged"] == "false"


class TestSimulate:
    ARGS = ("simulate", "--scheme", "cc", "--l", "2", "--powers", "3,5", "--trials", "200000",
            "--seed", "5", *BASE)

    def test_deterministic(self):
        a = run(*self.ARGS)
        b = run(*self.ARGS)
        assert a == b and a[0] == 0

    def test_worker_independent(self):
        assert run(*self.ARGS, "--workers", "3") == run(*self.ARGS)

    def test_agrees_with_exact(self):
        code, text = run("simulate", "--scheme", "ir", "--l", "2", "--powers", "10,10",
                         "--trials", "10000000", "--seed", "1", "--json", *BASE)
        assert code == 0
        rec = json.loads(text)
        _, exact_text = run("outage", "--scheme", "ir", "--l", "2", "--powers", "10,10", "--json", *BASE)
        exact = json.loads(exact_text)
        for k in (1, 2):
            assert abs(rec[f"p_out_{k}"] - exact[f"p_out_{k}"]) <= 3 * rec[f"std_err_{k}"]

    @pytest.mark.parametrize("trials", ["0", "-10"])
    def test_bad_trials(self, trials):
        args = list(self.ARGS)
        args[args.index("200000")] = trials
        assert run(*args)[0] == 2


SWEEP = """\
# three schemes, three methods
schemes = [arq, cc, ir]
methods = [exact, gpp, epa]
n = 2
l = 2
rate = 2
budgets_db = [10, 20, 30]
"""


@pytest.fixture(scope="module")
def full_sweep(tmp_path_factory):
    d = tmp_path_factory.mktemp("sweep")
    conf = d / "sweep.cfg"
    conf.write_text(SWEEP)
    out = d / "rows.csv"
    assert main([ "sweep", str(conf), "-o", str(out)]) == 0
    return out.read_text()


class TestSweep:
    def test_cardinality_and_header(self, full_sweep):
        lines = full_sweep.splitlines()
        assert lines[0] == "scheme,method,budget_db,p_out_L,avg_energy,kkt_residual,converged,P1,P2"
        assert len(lines) == 28

    def test_row_order(self, full_sweep):
        rows = list(csv.DictReader(io.StringIO(full_sweep)))
        keys = [(r["scheme"], r["method"], float(r["budget_db"])) for r in rows]
        order = {"arq": 0, "cc": 1, "ir": 2, "exact": 0, "gpp": 1, "epa": 2}
        assert keys == sorted(keys, key=lambda k: (order[k[0]], order[k[1]], k[2]))

    def test_dominance_and_ranges(self, full_sweep):
        rows = list(csv.DictReader(io.StringIO(full_sweep)))
        by = {(r["scheme"], r["method"], r["budget_db"]): r for r in rows}
        for (scheme, method, b), r in by.items():
            assert 0.0 <= float(r["p_out_L"]) <= 1.0
            assert float(r["avg_energy"]) <= db_to_linear(float(b)) + 1e-8
            if method == "exact":
                epa = by[(scheme, "epa", b)]
                assert float(r["p_out_L"]) <= float(epa["p_out_L"])
                assert r["converged"] == "true"

    def test_round_trip_numbers(self, full_sweep):
        rows = list(csv.reader(io.StringIO(full_sweep)))[1:]
        for row in rows:
            for cell in row[2:7] + row[7:]:
                if cell in ("true", "false"):
                    continue
                assert format_number(float(cell)) == cell

    def test_deterministic_and_threads(self, tmp_path, monkeypatch):
        conf = tmp_path / "s.cfg"
        conf.write_text("schemes = cc\nmethods = [exact, epa]\nn = 2\nl = 2\nrate = 2\nbudgets_db = 12:13:0.5\n")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["sweep", str(conf), "-o", str(a)]) == 0
        monkeypatch.setenv(THREADS_ENV, "3")
        assert main(["sweep", str(conf), "-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert len(a.read_text().splitlines()) == 1 + 2 * 3

    def test_unwritable_output(self, tmp_path):
        conf = tmp_path / "s.cfg"
        conf.write_text("methods = gpp\nn = 2\nl = 2\nrate = 2\nbudgets_db = [10]\n")
        assert main(["sweep", str(conf), "-o", str(tmp_path / "missing" / "x.csv")]) == 4

    def test_output_key_and_stdout(self, tmp_path):
        target = tmp_path / "from_key.csv"
        conf = tmp_path / "s.cfg"
        conf.write_text(f"methods = gpp\nn = 2\nl = 3\nrate = 2\nbudgets_db = [10]\noutput = {target}\n")
        assert main(["sweep", str(conf)]) == 0
        assert target.read_text().splitlines()[0].endswith("P1,P2,P3")
        out = io.StringIO()
        assert main(["sweep", str(conf), "-o", "-"], out=out) == 0
        assert out.getvalue() == target.read_text()

    def test_unconverged_rows_kept(self, tmp_path, monkeypatch, capsys):
        import dataclasses

        import imimo.sweep as sweep

        real = sweep.solve
        monkeypatch.setattr(
            sweep, "solve",
            lambda c, m, **kw: dataclasses.replace(real(c, "gpp"), converged=False)
            if m.value == "exact" else real(c, m),
        )
        conf = tmp_path / "s.cfg"
        conf.write_text("schemes = [arq, cc]\nmethods = [exact, gpp]\nn = 2\nl = 2\nrate = 2\nbudgets_db = [10]\n")
        out = tmp_path / "o.csv"
        assert main(["sweep", str(conf), "-o", str(out)]) == 0
        assert "2 of 4" in capsys.readouterr().err
        assert out.read_text().count(",false,") == 2

    @pytest.mark.parametrize(
        "text",
        [
            "n = 2\nl = 2\nrate = 2\n",
            "n = 2\nl = 2\nrate = 2\nbudgets_db = [10]\ncolour = red\n",
            "n = 2\nn = 3\nl = 2\nrate = 2\nbudgets_db = [10]\n",
            "n = 2\nl = 2\nrate = 2\nbudgets_db = [20, 10]\n",
            "n = 2\nl = 2\nrate = 2\nbudgets_db = [10, 10]\n",
            "n = 2\nl = 2\nrate = 2\nbudgets_db = [10\n",
            "n = 2\nl = 2\nrate = 2\nbudgets_db = [10]\nmethods = []\n",
            "n = 2\nl = 4\nrate = 2\nbudgets_db = [10]\n",
            "n = two\nl = 2\nrate = 2\nbudgets_db = [10]\n",
            "just text\n",
        ],
    )
    def test_bad_configs(self, text, tmp_path):
        with pytest.raises(InvalidArgumentError):
            parse_sweep_config(text)
        conf = tmp_path / "bad.cfg"
        conf.write_text(text)
        assert main(["sweep", str(conf), "-o", str(tmp_path / "x.csv")]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["sweep", str(tmp_path / "nope.cfg")]) == 2

    def test_range_syntax(self):
        spec = parse_sweep_config("n=2\nl=2\nrate=2\nbudgets_db = 10:11:0.1\n")
        assert len(spec.budget_grid_db) == 11
        assert spec.budget_grid_db[3] == 10.3
        assert spec.budget_grid_db[-1] == 11.0

    def test_spec_validation(self):
        base = parse_sweep_config("n=2\nl=2\nrate=2\nbudgets_db=[1]\n")
        with pytest.raises(InvalidArgumentError):
            SweepSpec(base.template, (1.0,), (), base.schemes)

    def test_header(self):
        assert csv_header(3)[-3:] == ["P1", "P2", "P3"]


def test_db_round_trip():
    for db in (-20.0, -3.3, 0.0, 0.1, 12.34, 40.0, 77.7):
        assert abs(linear_to_db(db_to_linear(db)) - db) <= 1e-12


def test_threads_env(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert default_threads() == 1
    monkeypatch.setenv(THREADS_ENV, "4")
    assert default_threads() == 4
    monkeypatch.setenv(THREADS_ENV, "zero")
    with pytest.raises(InvalidArgumentError):
        default_threads()


def test_format_number():
    assert format_number(0.1) == "0.10000000000000001"
    assert float(format_number(math.pi)) == math.pi
    assert format_number(True) == "true"
    assert format_number(7) == "7"


def test_console_script():
    proc = subprocess.run(
        [sys.executable, "-m", "imimo.cli", "outage", "--scheme", "arq", "--l", "1",
         "--powers", "10", *BASE],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert "p_out_1=0.03693631311376" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "imimo.cli", "simulate", "--scheme", "cc", "--l", "1",
                           "--powers", "1", "--trials", "0", *BASE], capture_output=True, text=True)
    assert proc.returncode == 2
