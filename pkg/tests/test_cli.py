import json

import numpy as np
import pytest

from stratafront import NumericalFailureError, cli, constant_medium, media
from stratafront.cli import _parse_grid
from stratafront.torus2d import UnboundednessReport


def _read_csv(path):
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


def test_parse_grid_includes_endpoints():
    g = _parse_grid("0:2:0.1")
    assert len(g) == 21
    assert g[0] == 0.0
    assert g[-1] == pytest.approx(2.0)
    with pytest.raises(Exception):
        _parse_grid("0:2")


def test_dispersion_comb_row_count(tmp_path):
    rc = cli.main(
        ["dispersion", "--comb", "1,1", "--lambda-grid", "0:2:0.1", "--out", str(tmp_path)]
    )
    assert rc == 0
    header, rows = _read_csv(tmp_path / "dispersion.csv")
    assert header == ["lambda", "theta", "lambda_cos_theta", "mu", "method", "grid_N", "residual"]
    assert len(rows) == 21
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["subcommand"] == "dispersion"
    assert manifest["status"] == "ok"


def test_dispersion_constant_medium_flat_curve(tmp_path):
    mpath = tmp_path / "const.json"
    media.save_medium(constant_medium(1.0, 1.0), mpath)
    out = tmp_path / "run"
    rc = cli.main(
        ["dispersion", "--medium", str(mpath), "--lambda-grid", "0:1:0.25",
         "--grid-N", "64", "--out", str(out)]
    )
    assert rc == 0
    _, rows = _read_csv(out / "dispersion.csv")
    mus = [float(r[3]) for r in rows]
    assert all(abs(mu + 1.0) < 1e-9 for mu in mus)
    manifest = json.loads((out / "manifest.json").read_text())
    assert "medium" in manifest["input_hashes"]


def test_dispersion_comb_vs_mollified_agreement(tmp_path):
    rc = cli.main(
        ["dispersion", "--comb", "1,1", "--lambda-grid", "0:1:0.5",
         "--out", str(tmp_path / "comb")]
    )
    assert rc == 0
    h = media.make_dirac_comb(1.0, 1.0, 1.0)
    mpath = tmp_path / "moll.json"
    media.save_medium(media.mollify(h, 0.05), mpath)
    rc = cli.main(
        ["dispersion", "--medium", str(mpath), "--lambda-grid", "0:1:0.5",
         "--grid-N", "1024", "--out", str(tmp_path / "moll")]
    )
    assert rc == 0
    _, comb_rows = _read_csv(tmp_path / "comb" / "dispersion.csv")
    _, moll_rows = _read_csv(tmp_path / "moll" / "dispersion.csv")
    for c, m in zip(comb_rows, moll_rows):
        assert abs(float(c[3]) - float(m[3])) <= 1e-2


def test_determinism_bitwise(tmp_path):
    argsets = [
        ["dispersion", "--comb", "1,1", "--lambda-grid", "0:1:0.1"],
        ["speeds", "--comb", "1,1", "--theta-grid", "5", "--phi-grid", "64"],
    ]
    for args in argsets:
        d1, d2 = tmp_path / (args[0] + "_1"), tmp_path / (args[0] + "_2")
        assert cli.main(args + ["--out", str(d1)]) == 0
        assert cli.main(args + ["--out", str(d2)]) == 0
        for f1 in sorted(d1.glob("*.csv")):
            f2 = d2 / f1.name
            assert f1.read_bytes() == f2.read_bytes()
        m1 = json.loads((d1 / "manifest.json").read_text())
        m2 = json.loads((d2 / "manifest.json").read_text())
        m1.pop("wall_time_s"), m2.pop("wall_time_s")
        assert m1 == m2


def test_speeds_polar_monotone(tmp_path):
    rc = cli.main(
        ["speeds", "--comb", "1,1", "--theta-grid", "19", "--phi-grid", "64",
         "--out", str(tmp_path)]
    )
    assert rc == 0
    _, rows = _read_csv(tmp_path / "speeds_polar.csv")
    cs = [float(r[1]) for r in rows]
    ws = [float(r[3]) for r in rows]
    assert len(cs) == 19
    assert all(b > a for a, b in zip(cs, cs[1:]))
    assert all(b > a for a, b in zip(ws, ws[1:]))


def test_wulff_artifacts(tmp_path):
    rc = cli.main(
        ["wulff", "--comb", "1,1", "--theta-grid", "64", "--phi-grid", "64",
         "--out", str(tmp_path)]
    )
    assert rc == 0
    _, poly = _read_csv(tmp_path / "wulff_polygon.csv")
    assert len(poly) >= 32
    _, polar = _read_csv(tmp_path / "wulff_polar.csv")
    assert len(polar) == 64


def test_asymptotics_table(tmp_path):
    rc = cli.main(
        ["asymptotics", "--alpha", "1", "--L", "50", "--theta-grid", "5",
         "--phi-grid", "64", "--out", str(tmp_path)]
    )
    assert rc == 0
    header, rows = _read_csv(tmp_path / "asymptotics.csv")
    assert header == ["theta", "c_star", "c_star_large_L_ref", "w", "w_large_L_ref"]
    # computed values sit on the large-period references at L = 50
    r0 = rows[0]
    assert abs(float(r0[1]) / float(r0[2]) - 1.0) <= 0.05   # c*(0)/ (L at/2)
    r90 = rows[-1]
    assert abs(float(r90[1]) / float(r90[2]) - 1.0) <= 0.05  # c*(pi/2) / (L at)
    for r in rows:
        assert abs(float(r[3]) / float(r[4]) - 1.0) <= 0.05


def test_simulate_from_config(tmp_path):
    mdict = media.medium_to_dict(constant_medium(1.0, 1.0))
    cfg = {
        "medium": mdict,
        "reaction": {"kind": "F1", "slope": 1.0},
        "X": 12.0,
        "dx": 0.1,
        "T": 2.0,
        "r0": 2.0,
        "thetas": [0.0],
    }
    cfg_path = tmp_path / "sim.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "run"
    rc = cli.main(["simulate", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 0
    header, rows = _read_csv(out / "trace.csv")
    assert header == ["theta", "t", "r"]
    assert len(rows) >= 10
    meta = json.loads((out / "run_metadata.json").read_text())
    assert meta["boundary_clear"] is True
    assert "fitted_speeds" in meta


def test_usage_errors_exit_two(tmp_path):
    assert cli.main(["dispersion", "--comb", "nonsense", "--out", str(tmp_path)]) == 2
    assert cli.main(["dispersion", "--out", str(tmp_path)]) == 2
    assert cli.main(["dispersion", "--medium", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["no-such-command"]) == 2


def test_numerical_failure_exits_three(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NumericalFailureError("synthetic solver breakdown", {"residual": 1.0})

    monkeypatch.setattr(cli.eigen, "dispersion_curve", boom)
    rc = cli.main(["dispersion", "--comb", "1,1", "--out", str(tmp_path)])
    assert rc == 3


def test_property_failure_exits_four(tmp_path, monkeypatch):
    report = UnboundednessReport(
        n_list=(1, 2),
        mu_values=(-1.0, -1.1),
        c_values=(2.0, 2.1),
        mu_strictly_decreasing=True,
        c_strictly_increasing=True,
        divergence_witness=False,
    )
    monkeypatch.setattr(cli.torus2d, "unboundedness_demo", lambda *a, **k: report)
    rc = cli.main(["torus-demo", "--n", "1,2", "--out", str(tmp_path)])
    assert rc == 4
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "property-failure"
    header, rows = _read_csv(tmp_path / "torus_demo.csv")
    assert header == ["n", "mu", "c_star"]
    assert len(rows) == 2
