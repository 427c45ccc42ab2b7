import csv
import io
import json
from fractions import Fraction

import pytest
from click.testing import CliRunner

from ura_auth_lab import analytics as an
from ura_auth_lab import selftest as selftest_mod
from ura_auth_lab.channels import PfpRow, PfpTable
from ura_auth_lab.cli import main
from ura_auth_lab.experiment import (
    ExperimentSpec,
    UsageError,
    compare_schemes,
    preset,
)
from ura_auth_lab.model import InfeasibleConfigurationError


def run(*args):
    return CliRunner().invoke(main, list(args))


def parse_csv(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def test_fig3_analytic_values():
    res = run("analytic", "--preset", "fig3")
    assert res.exit_code == 0, res.output
    assert res.output.startswith("# spec=")
    rows = parse_csv(res.output)
    assert len(rows) == 31
    assert [int(r["N"]) for r in rows][0::10] == [1000, 10000, 100000, 1000000]
    first = rows[0]
    q = 1 - Fraction(1, 2**32)
    assert float(first["p_succ_exh"]) == pytest.approx(float(q ** 1098), rel=1e-8)
    for r in rows:
        assert float(r["p_succ_heur"]) >= float(r["p_succ_exh"])
        assert float(r["p_misauth_heur"]) >= float(r["p_misauth_exh"])
    succ = [float(r["p_succ_exh"]) for r in rows]
    assert succ == sorted(succ, reverse=True)


def test_analytic_is_deterministic_and_writes_file(tmp_path):
    out = tmp_path / "a.csv"
    assert run("analytic", "--preset", "fig3", "--out", str(out)).exit_code == 0
    assert out.read_text() == run("analytic", "--preset", "fig3").output


def test_simulate_output_is_byte_identical(tmp_path):
    a = run("simulate", "--preset", "exhaustive-small", "--trials", "300", "--seed", "5")
    b = run("simulate", "--preset", "exhaustive-small", "--trials", "300", "--seed", "5",
            "--workers", "2")
    assert a.exit_code == 0 and a.output == b.output
    doc = json.loads(a.output)
    assert doc["spec"]["masterSeed"] == 5 and doc["spec"]["trials"] == 300
    (pt,) = doc["points"]
    assert pt["counters"]["rounds"] == 300
    c = run("simulate", "--preset", "exhaustive-small", "--trials", "300", "--seed", "6")
    assert c.output != a.output


def test_simulate_sweep_from_config(tmp_path):
    path = write_json(tmp_path / "s.json", {
        "name": "sweep", "config": {"N": 50, "K": 5, "L": 6, "D": 16},
        "channel": {"kind": "parametric", "pTP": 0.9}, "authVariant": "Heuristic",
        "sweep": {"parameter": "pTP", "grid": [0.5, 1.0]}, "trials": 100,
    })
    res = run("simulate", "--config", path)
    assert res.exit_code == 0, res.output
    doc = json.loads(res.output)
    assert [p["sweepValue"] for p in doc["points"]] == [0.5, 1.0]
    assert [p["decodingProbability"] for p in doc["points"]] == [0.5, 1.0]


def test_usage_errors(tmp_path):
    assert run("analytic").exit_code == 2
    assert run("analytic", "--preset", "nope").exit_code == 2
    assert run("analytic", "--preset", "fig3", "--config", "x.json").exit_code == 2
    assert run("analytic", "--config", str(tmp_path / "missing.json")).exit_code == 2
    assert run("simulate", "--preset", "fig3", "--trials", "0").exit_code == 2
    bad = write_json(tmp_path / "b.json", {"name": "b", "config": {"N": 5, "K": 2, "L": 4, "D": 8},
                                           "channel": {"kind": "parametric"}, "bogus": 1})
    assert run("simulate", "--config", bad).exit_code == 2
    neg = write_json(tmp_path / "n.json", {"name": "n", "config": {"N": -5, "K": 2, "L": 4, "D": 8},
                                           "channel": {"kind": "parametric"}})
    assert run("simulate", "--config", neg).exit_code == 2


def test_gaussian_toy_infeasible(tmp_path):
    path = write_json(tmp_path / "g.json", {
        "name": "g", "config": {"N": 10, "K": 2, "L": 12, "D": 8, "n": 16},
        "channel": {"kind": "gaussian_toy"}, "trials": 5,
    })
    assert run("simulate", "--config", path).exit_code == 3


def test_gaussian_toy_runs(tmp_path):
    path = write_json(tmp_path / "g.json", {
        "name": "g", "config": {"N": 10, "K": 2, "L": 3, "D": 3, "n": 8, "P": 4.0},
        "channel": {"kind": "gaussian_toy", "codebookSeed": 3}, "trials": 20,
    })
    res = run("simulate", "--config", path)
    assert res.exit_code == 0, res.output
    assert json.loads(res.output)["points"][0]["decodingProbability"] is None


def _table(B_list, energies, p, K=None):
    return PfpTable(tuple(PfpRow(B, e, p) for B in B_list for e in energies), K=K)


def test_compare_schemes_constant_tables():
    N, K, D, L, A = 1000, 10, 8, 8, 10
    tables = {"Bare": _table([D], [0, 5, 10], 0.1),
              "MacOnly": _table([D + L], [0, 5, 10], 0.1),
              "AddressMac": _table([D + L + A], [2, 5, 12], 0.1)}
    cols, rows = compare_schemes(tables, N=N, K=K, D=D, L=L, A=A, kTP=9)
    assert [r[0] for r in rows] == [2, 5, 10]
    for r in rows:
        d = dict(zip(cols, r))
        assert d["misauth_bare"] == pytest.approx(0.1)
        assert d["misauth_mac_only"] == pytest.approx(0.1 * an.prob_fp_accept_exhaustive(N, 9, K, L))
        assert d["misauth_address_mac"] == pytest.approx(0.1 * 2.0**-L)
        assert d["floor_bare"] == pytest.approx(an.collision_floor(K, D))
        assert d["misauth_address_mac"] < d["misauth_mac_only"] < d["misauth_bare"]


def test_compare_schemes_disjoint_ranges(tmp_path):
    tables = {"Bare": _table([8], [0, 1], 0.1), "MacOnly": _table([16], [5, 6], 0.1),
              "AddressMac": _table([26], [0, 6], 0.1)}
    with pytest.raises(InfeasibleConfigurationError):
        compare_schemes(tables, N=100, K=10, D=8, L=8, A=10)
    paths = {}
    for s, t in tables.items():
        p = tmp_path / f"{s}.csv"
        p.write_text("B,energy_db,p_fp\n" + "".join(f"{r.B},{r.energy_db},{r.p_fp}\n" for r in t.rows))
        paths[s] = str(p)
    spec = write_json(tmp_path / "c.json", {"name": "c", "config": {"N": 100, "K": 10, "L": 8, "D": 8, "A": 10,
                                                                    "scheme": "AddressMac"},
                                            "channel": {"kind": "parametric"}})
    res = run("compare-schemes", "--config", spec, "--table-bare", paths["Bare"],
              "--table-mac", paths["MacOnly"], "--table-addr", paths["AddressMac"])
    assert res.exit_code == 3
    assert run("compare-schemes", "--config", spec, "--table-bare", paths["Bare"]).exit_code == 2


def test_spec_round_trip_and_overrides(tmp_path):
    spec = preset("spoof")
    again = ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert again == spec
    assert spec.with_overrides(trials=None).trials == spec.trials
    assert spec.with_overrides(trials=7).trials == 7
    with pytest.raises(UsageError):
        ExperimentSpec.from_dict({**spec.to_dict(), "sweep": {"parameter": "N", "grid": []}})
    with pytest.raises(UsageError):
        ExperimentSpec.from_dict({**spec.to_dict(), "sweep": {"parameter": "Q", "grid": [1]}})


def test_selftest_quick_passes():
    res = run("selftest", "--quick")
    assert res.exit_code == 0, res.output
    assert "FAIL" not in res.output


@pytest.mark.slow
def test_selftest_full_passes():
    assert run("selftest").exit_code == 0


def test_selftest_detects_a_broken_closed_form(monkeypatch):
    real = selftest_mod.an.prob_success_heuristic_closed
    monkeypatch.setattr(selftest_mod.an, "prob_success_heuristic_closed",
                        lambda Nj, L: real(Nj, L) * (1 + 1e-9))
    lines = []
    assert selftest_mod.run_selftest(lines.append, quick=True) is False
    assert any(l.startswith("FAIL  closed-form identity") for l in lines)
    res = run("selftest", "--quick")
    assert res.exit_code == 1
