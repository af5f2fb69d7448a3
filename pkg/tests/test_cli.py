import json

import pytest

from shiftlab import cli


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def identity_cfg(**extra):
    return {"m_max": 4, "seed": 0, "family": {"type": "custom-matrix-list", "matrices": [1.0]},
            "schedule": {"type": "arithmetic", "max_k": 6}, "provider": {"type": "constant-P_m", "m": 1},
            "J": 0, "m": 1, "checks": ["dense_hypercyclicity"], **extra}


def test_list_presets_sorted(capsys):
    assert cli.main(["list-presets"]) == 0
    names = [line.split()[0] for line in capsys.readouterr().out.strip().splitlines()]
    assert names == sorted(names) and "salas-hc" in names and "identity-weights" in names


@pytest.mark.parametrize("preset", sorted(cli.presets()))
def test_presets_exit_codes(preset, tmp_path):
    expected = 2 if preset == "identity-weights" else 0
    assert cli.main(["run", preset, "--out", str(tmp_path)]) == expected
    assert (tmp_path / "report.json").exists()
    csvs = list(tmp_path.glob("*.csv"))
    svgs = list(tmp_path.glob("*.svg"))
    assert csvs and svgs
    assert all(s.read_text().startswith("<svg") for s in svgs)


def test_csv_determinism(tmp_path):
    for preset in ("salas-chaos", "phi-compact"):
        a, b = tmp_path / f"{preset}-a", tmp_path / f"{preset}-b"
        cli.main(["run", preset, "--out", str(a)])
        cli.main(["run", preset, "--out", str(b)])
        names = sorted(p.name for p in a.glob("*.csv"))
        assert names == sorted(p.name for p in b.glob("*.csv"))
        for n in names:
            assert (a / n).read_bytes() == (b / n).read_bytes()


@pytest.mark.parametrize("cfg", [
    {"m_max": 4},
    identity_cfg(m_max="four"),
    identity_cfg(m_max=True),
    identity_cfg(family={"type": "nope"}),
    identity_cfg(checks=["not_a_check"]),
    identity_cfg(schedule={"type": "arithmetic", "step": 0}),
])
def test_malformed_config_exits_1(cfg, tmp_path, capsys):
    assert cli.main(["run", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    assert "shiftlab:" in capsys.readouterr().err


def test_unparseable_and_missing(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert cli.main(["run", "no-such-preset", "--out", str(tmp_path / "o")]) == 1
    assert capsys.readouterr().err.count("config error") == 2


def test_horizon_and_construction_errors(tmp_path, capsys):
    horizon = {"m_max": 8, "seed": 0, "grid": {"h": 1.0},
               "family": {"type": "translation", "preset": "constant-by-sign", "eps": 0.75, "r": 1.0},
               "schedule": {"type": "arithmetic", "start": 1, "max_k": 4}, "provider": {"type": "cutoff", "m": 2},
               "J": 0, "m": 2, "checks": ["dense_hypercyclicity"],
               "witnesses": [{"type": "transitivity", "t": [40]}]}
    assert cli.main(["run", write(tmp_path, horizon, "h.json"), "--out", str(tmp_path / "h")]) == 1
    err_h = capsys.readouterr().err
    construction = identity_cfg(witnesses=[{"type": "periodic", "t": [3]}])
    assert cli.main(["run", write(tmp_path, construction, "c.json"), "--out", str(tmp_path / "c")]) == 1
    err_c = capsys.readouterr().err
    assert "horizon exceeded" in err_h and "construction failed" in err_c
    assert err_h.splitlines()[0].split(":")[1] != err_c.splitlines()[0].split(":")[1]


def test_overrides(tmp_path):
    doc = cli.run("salas-hc", tmp_path / "a", max_k=10, tol=1e-2)
    rep = doc["checks"]["dense_hypercyclicity"]
    assert rep["horizon"] == 10 and rep["tol"] == 1e-2 and rep["verdict"] == "satisfied-at-tolerance"
    assert doc["overrides"] == {"max_k": 10, "tol": 1e-2}
    doc = cli.run("salas-hc", None, max_k=5)
    assert doc["checks"]["dense_hypercyclicity"]["verdict"] == "not-satisfied-within-horizon"
    assert doc["exit_code"] == 2


def test_thread_count_does_not_change_output(tmp_path, monkeypatch):
    monkeypatch.setenv("SHIFTLAB_THREADS", "1")
    cli.main(["run", "translation-hc", "--out", str(tmp_path / "one")])
    monkeypatch.setenv("SHIFTLAB_THREADS", "4")
    cli.main(["run", "translation-hc", "--out", str(tmp_path / "four")])
    for p in (tmp_path / "one").glob("*.csv"):
        assert p.read_bytes() == (tmp_path / "four" / p.name).read_bytes()


def test_svg_rendering():
    svg = cli.render_svg("t", {"a": ([1, 2, 3], [1.0, 1e-3, 0.0])})
    assert svg.startswith("<svg") and "polyline" in svg
