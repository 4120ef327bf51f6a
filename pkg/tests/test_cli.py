"""Command line: configuration, result files, exit codes and determinism."""

import json

import numpy as np
import pytest

from schmidt_tns.checkpoint import load_checkpoint, save_checkpoint
from schmidt_tns.cli import ConfigError, parse_config, run

PAIR = """\
model.kind = heisenberg
lattice.file = pair.lat
architecture.chi = 1
optimizer.eta = 0.5
optimizer.max_steps = 2000
seed = 0
"""

CELL = """\
model.kind = tim
model.h_x = 0.7   # low-entanglement point
lattice.cells = 1
architecture.n_layers = 1
architecture.chi = 4
optimizer.eta = 1.0
optimizer.max_steps = 40
compare.n_layers = 0, 1
"""


def _records(path):
    lines = path.read_text().splitlines()
    return [json.loads(x) for x in lines]


@pytest.fixture
def pair_cfg(tmp_path):
    (tmp_path / "pair.lat").write_text("sites 2\nedge 0 1\npartA 0\n")
    cfg = tmp_path / "pair.cfg"
    cfg.write_text(PAIR)
    return cfg


@pytest.fixture
def cell_cfg(tmp_path):
    cfg = tmp_path / "cell.cfg"
    cfg.write_text(CELL)
    return cfg


def test_parse_defaults_and_values():
    cfg = parse_config("model.kind = tim\nmodel.h_x = 0.25\narchitecture.infinite = yes\nlattice.boundary = infinite\n")
    assert cfg["model.h_x"] == 0.25
    assert cfg["architecture.infinite"] is True
    assert cfg["architecture.chi"] == 2
    assert len(cfg.digest()) == 64


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("model.colour = red\n", "unknown"),
        ("[model]\nkind = tim\n", "section"),
        ("architecture.chi = two\n", "architecture.chi"),
        ("model.kind = tim\n", "h_x"),
        ("model.kind = heisenberg\nmodel.h_x = 0.1\n", "h_x"),
        ("lattice.boundary = infinite\n", "infinite"),
        ("seed = -1\n", "seed"),
        ("model.kind = potts\n", "model.kind"),
    ],
)
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_train_pair_gives_singlet(pair_cfg, tmp_path):
    out = tmp_path / "run"
    assert run(["train", "--config", str(pair_cfg), "--out", str(out)]) == 0
    trace = _records(out / "trace.jsonl")
    assert trace[0]["format"] == "schmidt-tns-results"
    assert trace[-1]["record"] == "summary"
    assert run(["energy", "--checkpoint", str(out / "checkpoint.stns"), "--out", str(out)]) == 0
    rec = _records(out / "energy.jsonl")
    assert rec[0]["config_hash"] == trace[0]["config_hash"]
    assert rec[1]["E"] == pytest.approx(-0.75, abs=1e-6)


def test_results_are_deterministic(pair_cfg, tmp_path):
    for name in ("a", "b"):
        assert run(["train", "--config", str(pair_cfg), "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "trace.jsonl").read_text().splitlines()
    b = (tmp_path / "b" / "trace.jsonl").read_text().splitlines()
    assert a[1:] == b[1:]
    ha, hb = json.loads(a[0]), json.loads(b[0])
    ha.pop("timestamp"), hb.pop("timestamp")
    assert ha == hb
    ca = (tmp_path / "a" / "checkpoint.stns").read_bytes()
    assert ca == (tmp_path / "b" / "checkpoint.stns").read_bytes()


def test_seed_flag_changes_hash(pair_cfg, tmp_path):
    run(["ed", "--config", str(pair_cfg), "--out", str(tmp_path / "x")])
    run(["ed", "--config", str(pair_cfg), "--seed", "9", "--out", str(tmp_path / "y")])
    hx = _records(tmp_path / "x" / "ed.jsonl")[0]["config_hash"]
    hy = _records(tmp_path / "y" / "ed.jsonl")[0]["config_hash"]
    assert hx != hy


def test_floats_use_17_digits(pair_cfg, tmp_path):
    run(["ed", "--config", str(pair_cfg), "--out", str(tmp_path)])
    line = (tmp_path / "ed.jsonl").read_text().splitlines()[2]
    g = json.loads(line)["gamma"]
    assert repr(g) in line or format(g, ".17g") in line
    assert float(format(g, ".17g")) == g


def test_spectrum_sample_ed_compare(cell_cfg, tmp_path):
    out = tmp_path / "cell"
    assert run(["train", "--config", str(cell_cfg), "--out", str(out)]) == 0
    ckpt = str(out / "checkpoint.stns")
    assert run(["spectrum", "--checkpoint", ckpt, "--top", "5", "--out", str(out)]) == 0
    rows = _records(out / "spectrum.jsonl")
    coeffs = [r for r in rows if r.get("record") == "coefficient"]
    assert len(coeffs) == 5
    for r in coeffs:
        assert len(r["r"]) == 4
        assert r["minus_log2_gamma"] == pytest.approx(-np.log2(r["gamma"]))
    assert rows[-1]["record"] == "entropy" and "S_MPS" in rows[-1]

    assert run(["sample", "--checkpoint", ckpt, "--samples", "25", "--seed", "3", "--out", str(out)]) == 0
    samples = _records(out / "samples.jsonl")
    assert samples[1]["n"] == 25 and len(samples) == 27

    assert run(["ed", "--config", str(cell_cfg), "--out", str(out)]) == 0
    ed = _records(out / "ed.jsonl")
    assert ed[1]["N"] == 9 and ed[1]["E_b"] < 0

    assert run(["compare", "--config", str(cell_cfg), "--out", str(out)]) == 0
    cmp_ = _records(out / "compare.jsonl")
    depths = [r for r in cmp_ if r.get("record") == "depth"]
    assert [d["n_layers"] for d in depths] == [0, 1]
    assert all(d["epsilon"] >= -1e-9 for d in depths)
    assert any(r.get("record") == "coefficient" for r in cmp_)


def test_exit_codes(pair_cfg, tmp_path, capsys):
    assert run(["ed", "--config", str(tmp_path / "missing.cfg")]) == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "config" and err["exit_code"] == 1
    assert run(["frobnicate"]) == 1
    capsys.readouterr()
    assert run(["energy"]) == 1

    out = tmp_path / "run"
    run(["train", "--config", str(pair_cfg), "--out", str(out)])
    ckpt = out / "checkpoint.stns"
    raw = ckpt.read_bytes()
    (tmp_path / "cut.stns").write_bytes(raw[: len(raw) // 2])
    capsys.readouterr()
    assert run(["energy", "--checkpoint", str(tmp_path / "cut.stns")]) == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "checkpoint" and "corrupted" in err["message"]

    state, meta = load_checkpoint(ckpt, with_metadata=True)
    arrays = state.arrays()
    name = next(iter(state.unitary_names()))
    arrays[name] = arrays[name] * 1.001
    save_checkpoint(state.with_arrays(arrays), tmp_path / "bad.stns", meta)
    assert run(["energy", "--checkpoint", str(tmp_path / "bad.stns")]) == 2
    assert name in capsys.readouterr().err
