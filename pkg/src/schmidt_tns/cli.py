"""Batch front end.

Subcommands ``train``, ``energy``, ``spectrum``, ``sample``, ``ed`` and
``compare`` read a flat ``key = value`` configuration (dotted keys, ``#``
comments), write JSON-lines result files and exit with 0 on success, 1 on a
configuration error and 2 on a numerical failure. Errors are reported as one
JSON record on stderr.

Example configuration::

    model.kind = tim
    model.h_x = 0.2
    lattice.cells = 1
    architecture.n_layers = 2
    architecture.chi = 4
    optimizer.max_steps = 2000
    seed = 0
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .contraction import ConvergenceError, energy, infinite_energy
from .exact import (
    ed_ground_state,
    entanglement_entropy,
    mps_entanglement,
    schmidt_decompose,
    top_k_schmidt,
)
from .lattice import LatticeError, build_hamiltonian, build_zpaf, load_lattice, zpaf_fragment
from .optimizer import TrainConfig, TrainingDiverged, train, train_depth_series
from .sampler import sample
from .schmidt_state import ArchitectureError, init_state, make_architecture
from .tensor_core import ContractionError

RESULTS_FORMAT = "schmidt-tns-results"
RESULTS_VERSION = 1


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


# key -> (parser, default); ``None`` defaults mean "unset"
SCHEMA = {
    "model.kind": (str, "heisenberg"),
    "model.h_x": (float, None),
    "lattice.cells": (int, 1),
    "lattice.boundary": (str, "open"),
    "lattice.sites": (int, 0),
    "lattice.file": (str, None),
    "architecture.n_layers": (int, 0),
    "architecture.chi": (int, 2),
    "architecture.cell_size": (int, 0),
    "architecture.infinite": (_bool, False),
    "architecture.parity_even": (_bool, False),
    "architecture.init_eps": (float, 0.1),
    "optimizer.eta": (float, TrainConfig.eta),
    "optimizer.max_steps": (int, TrainConfig.max_steps),
    "optimizer.tol": (float, TrainConfig.tol),
    "optimizer.window": (int, TrainConfig.window),
    "optimizer.decay": (float, TrainConfig.decay),
    "optimizer.env_refresh": (int, TrainConfig.env_refresh),
    "optimizer.max_retries": (int, TrainConfig.max_retries),
    "compare.n_layers": (_int_list, (0, 2, 4)),
    "compare.warm_start": (_bool, True),
    "compare.noise": (float, 0.05),
    "compare.lam_floor": (float, 0.0),
    "output.dir": (str, "."),
    "seed": (int, 0),
}


@dataclass
class RunConfig:
    values: dict
    base_dir: Path

    def __getitem__(self, key):
        return self.values[key]

    def digest(self) -> str:
        canon = json.dumps(self.values, sort_keys=True, default=list)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(
                eta=self["optimizer.eta"],
                max_steps=self["optimizer.max_steps"],
                tol=self["optimizer.tol"],
                window=self["optimizer.window"],
                decay=self["optimizer.decay"],
                seed=self["seed"],
                env_refresh=self["optimizer.env_refresh"],
                max_retries=self["optimizer.max_retries"],
                parity_even=self["architecture.parity_even"],
            )
        except ValueError as err:
            raise ConfigError(str(err)) from None


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    """Validate a configuration text against :data:`SCHEMA`."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                   inline_comment_prefixes=("#",), delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as err:
        raise ConfigError(f"cannot parse configuration: {err}") from None
    if len(cp.sections()) != 1:
        raise ConfigError("section headers are not allowed; use dotted keys")
    values = {k: d for k, (_, d) in SCHEMA.items()}
    for key, raw in cp["config"].items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            values[key] = SCHEMA[key][0](raw)
        except ValueError as err:
            raise ConfigError(f"bad value for {key}: {err}") from None
    cfg = RunConfig(values, Path(base_dir))
    _check(cfg)
    return cfg


def _check(cfg: RunConfig) -> None:
    v = cfg.values
    if v["model.kind"] not in ("heisenberg", "xy", "tim"):
        raise ConfigError(f"model.kind must be heisenberg, xy or tim, not {v['model.kind']!r}")
    if v["model.kind"] == "tim" and (v["model.h_x"] is None or v["model.h_x"] < 0):
        raise ConfigError("model.h_x >= 0 is required for tim")
    if v["model.kind"] != "tim" and v["model.h_x"] is not None:
        raise ConfigError("model.h_x only applies to tim")
    if v["lattice.boundary"] not in ("open", "periodic", "infinite"):
        raise ConfigError("lattice.boundary must be open, periodic or infinite")
    if v["architecture.infinite"] != (v["lattice.boundary"] == "infinite"):
        raise ConfigError("architecture.infinite requires lattice.boundary = infinite and vice versa")
    if v["lattice.file"] and (v["lattice.sites"] or v["lattice.boundary"] != "open"):
        raise ConfigError("lattice.file excludes lattice.sites and non-open boundaries")
    if v["lattice.sites"] < 0 or v["lattice.cells"] < 1:
        raise ConfigError("lattice.sites must be >= 0 and lattice.cells >= 1")
    if v["seed"] < 0 or v["seed"] >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if not v["compare.n_layers"] or min(v["compare.n_layers"]) < 0:
        raise ConfigError("compare.n_layers must list nonnegative depths")


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read configuration {path}: {err.strerror}") from None
    return parse_config(text, p.parent)


def build_problem(cfg: RunConfig):
    """``(lattice, bipartition, hamiltonian)`` described by ``cfg``."""
    try:
        if cfg["lattice.file"]:
            path = Path(cfg["lattice.file"])
            if not path.is_absolute():
                path = cfg.base_dir / path
            try:
                lat, bip = load_lattice(path.read_text(encoding="utf-8"))
            except OSError as err:
                raise ConfigError(f"cannot read lattice file {path}: {err.strerror}") from None
        elif cfg["lattice.sites"]:
            lat, bip = zpaf_fragment(cfg["lattice.sites"])
        else:
            lat, bip = build_zpaf(cfg["lattice.cells"], cfg["lattice.boundary"])
        params = {} if cfg["model.h_x"] is None else {"h_x": cfg["model.h_x"]}
        H = build_hamiltonian(lat, cfg["model.kind"], params)
    except (LatticeError, ValueError) as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(str(err)) from None
    return lat, bip, H


def build_architecture(cfg: RunConfig, lat, bip, n_layers=None):
    try:
        return make_architecture(
            lat,
            bip,
            cfg["architecture.n_layers"] if n_layers is None else n_layers,
            chi=cfg["architecture.chi"],
            cell_size=cfg["architecture.cell_size"] or None,
            shared=False,
        )
    except ArchitectureError as err:
        raise ConfigError(str(err)) from None


# ----------------------------------------------------------------- output


def _fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return format(x, ".17g")
        return json.dumps(str(x))
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


class ResultWriter:
    """JSON lines with a fixed key order; the first line is the only one with a timestamp."""

    def __init__(self, command: str, config_hash: str, stream):
        self.stream = stream
        self.write({
            "format": RESULTS_FORMAT,
            "version": RESULTS_VERSION,
            "package_version": __version__,
            "command": command,
            "config_hash": config_hash,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        })

    def write(self, record: dict) -> None:
        self.stream.write(_fmt(record) + "\n")


def _open_output(out_dir, name):
    if out_dir is None:
        return sys.stdout, False
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return open(d / name, "w", encoding="utf-8"), True


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(_fmt({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


# ------------------------------------------------------------ subcommands


def _with_seed(cfg: RunConfig, seed):
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg.values["seed"] = seed
    return cfg


def _eval_energy(state, H):
    if state.arch.infinite:
        return infinite_energy(state, H)
    return energy(state, H)


def _train_one(cfg, lat, bip, H, n_layers, start=None):
    if start is None:
        arch = build_architecture(cfg, lat, bip, n_layers)
        start = init_state(arch, seed=cfg["seed"], eps=cfg["architecture.init_eps"],
                           parity_even=cfg["architecture.parity_even"])
    return train(start, H, cfg.train_config())


def cmd_train(args) -> int:
    cfg = _with_seed(load_config(args.config), args.seed)
    lat, bip, H = build_problem(cfg)
    out_dir = Path(args.out or cfg.base_dir / cfg["output.dir"])
    state, trace = _train_one(cfg, lat, bip, H, cfg["architecture.n_layers"])
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = Path(args.checkpoint) if args.checkpoint else out_dir / "checkpoint.stns"
    save_checkpoint(state, ckpt, {"config": cfg.values, "config_hash": cfg.digest(),
                                  "config_dir": str(cfg.base_dir.resolve())})
    with open(out_dir / "trace.jsonl", "w", encoding="utf-8") as fh:
        w = ResultWriter("train", cfg.digest(), fh)
        for i, (e, g, eta) in enumerate(zip(trace.E_b, trace.grad_norm, trace.eta)):
            w.write({"record": "step", "step": i, "E_b": e, "grad_norm": g, "eta": eta})
        final = _eval_energy(state, H)
        w.write({"record": "summary", "steps": len(trace.E_b), "reason": trace.reason,
                 "E": final.E, "E_b": final.E_b, "checkpoint": str(ckpt.name)})
    return 0


def _checkpoint_problem(args):
    state, meta = load_checkpoint(args.checkpoint, with_metadata=True)
    if args.config:
        cfg = load_config(args.config)
    elif "config" in meta:
        cfg = RunConfig(dict(meta["config"]), Path(meta.get("config_dir", ".")))
        _check(cfg)
    else:
        raise ConfigError("checkpoint carries no configuration; pass --config")
    _, _, H = build_problem(cfg)
    return state, cfg, H


def cmd_energy(args) -> int:
    if not args.checkpoint:
        raise ConfigError("energy needs --checkpoint")
    state, cfg, H = _checkpoint_problem(args)
    rep = _eval_energy(state, H)
    stream, close = _open_output(args.out, "energy.jsonl")
    w = ResultWriter("energy", cfg.digest(), stream)
    w.write({"record": "energy", "E": rep.E, "E_b": rep.E_b, "norm": rep.norm,
             "n_bonds": H.n_bonds, "infinite": state.arch.infinite})
    if close:
        stream.close()
    return 0


def _spectrum_rows(coefficients, labels=None):
    rows = []
    for i, g in enumerate(coefficients):
        rec = {"record": "coefficient", "rank": i + 1}
        if labels is not None:
            rec["r"] = "".join(str(b) for b in labels[i])
        rec["gamma"] = float(g)
        rec["minus_log2_gamma"] = -math.log2(g) if g > 0 else float("inf")
        rows.append(rec)
    return rows


def cmd_spectrum(args) -> int:
    if not args.checkpoint:
        raise ConfigError("spectrum needs --checkpoint")
    state, meta = load_checkpoint(args.checkpoint, with_metadata=True)
    if state.arch.infinite:
        raise ConfigError("spectrum needs a finite state")
    lam = state.lam
    k = min(args.top, 2**lam.R)
    top = top_k_schmidt(lam, k)
    stream, close = _open_output(args.out, "spectrum.jsonl")
    w = ResultWriter("spectrum", meta.get("config_hash", ""), stream)
    for rec in _spectrum_rows([g for _, g in top], [r for r, _ in top]):
        w.write(rec)
    amps = lam.dense()
    ee = entanglement_entropy(np.sort(amps / np.linalg.norm(amps))[::-1])
    s_mps = mps_entanglement(lam, lam.R // 2) if lam.R > 1 else 0.0
    w.write({"record": "entropy", "EE": ee, "S_MPS": s_mps, "mps_cut": lam.R // 2})
    if close:
        stream.close()
    return 0


def cmd_sample(args) -> int:
    if not args.checkpoint:
        raise ConfigError("sample needs --checkpoint")
    state, meta = load_checkpoint(args.checkpoint, with_metadata=True)
    seed = args.seed if args.seed is not None else 0
    if not 0 <= seed < 2**64:
        raise ConfigError("--seed must be an unsigned 64-bit integer")
    if args.samples < 1:
        raise ConfigError("--samples must be >= 1")
    if state.arch.infinite:
        raise ConfigError("sample needs a finite state")
    batch = sample(state.lam, args.samples, seed=seed, source=str(args.checkpoint))
    stream, close = _open_output(args.out, "samples.jsonl")
    w = ResultWriter("sample", meta.get("config_hash", ""), stream)
    w.write({"record": "batch", "n": args.samples, "R": batch.R, "seed": seed})
    for row in batch.bitstrings:
        stream.write('{"r": "' + "".join("1" if b else "0" for b in row) + '"}\n')
    if close:
        stream.close()
    return 0


def _ed(cfg):
    lat, bip, H = build_problem(cfg)
    if lat.infinite:
        raise ConfigError("ed needs a finite lattice")
    gs = ed_ground_state(H, lat.n_sites)
    spec = schmidt_decompose(gs.vector, bip, lat.n_sites)
    return lat, bip, H, gs, spec


def cmd_ed(args) -> int:
    cfg = _with_seed(load_config(args.config), args.seed)
    lat, bip, H, gs, spec = _ed(cfg)
    stream, close = _open_output(args.out, "ed.jsonl")
    w = ResultWriter("ed", cfg.digest(), stream)
    w.write({"record": "ground_state", "N": lat.n_sites, "E": gs.energy,
             "E_b": gs.energy / H.n_bonds, "gap": gs.next_energy - gs.energy,
             "residual": gs.residual, "EE": spec.entropy()})
    for rec in _spectrum_rows(spec.coefficients[: args.top]):
        w.write(rec)
    if close:
        stream.close()
    return 0


def cmd_compare(args) -> int:
    cfg = _with_seed(load_config(args.config), args.seed)
    lat, bip, H, gs, spec = _ed(cfg)
    e_ed = gs.energy / H.n_bonds
    stream, close = _open_output(args.out, "compare.jsonl")
    w = ResultWriter("compare", cfg.digest(), stream)
    w.write({"record": "ed", "E_b": e_ed, "EE": spec.entropy()})
    if args.checkpoint:
        state = load_checkpoint(args.checkpoint)
        runs = [(state.arch.n_layers, state)]
    else:
        series = train_depth_series(
            build_architecture(cfg, lat, bip, 0), H, cfg["compare.n_layers"], cfg.train_config(),
            warm_start=cfg["compare.warm_start"], init_eps=cfg["architecture.init_eps"],
            noise=cfg["compare.noise"], lam_floor=cfg["compare.lam_floor"],
        )
        runs = [(n_layers, state) for n_layers, state, _ in series]
    for n_layers, state in runs:
        rep = energy(state, H)
        w.write({"record": "depth", "n_layers": n_layers, "E_b": rep.E_b, "epsilon": rep.E_b - e_ed})
    state = runs[-1][1]
    k = min(args.top, 2**state.arch.R, len(spec))
    mine = [g for _, g in top_k_schmidt(state.lam, k)]
    for i, (g, g_ed) in enumerate(zip(mine, spec.coefficients[:k])):
        w.write({"record": "coefficient", "rank": i + 1, "gamma": g, "gamma_ed": float(g_ed),
                 "delta": g - float(g_ed)})
    amps = state.lam.dense()
    ee = entanglement_entropy(np.sort(amps / np.linalg.norm(amps))[::-1])
    w.write({"record": "entropy", "EE": ee, "EE_ed": spec.entropy(), "delta": ee - spec.entropy()})
    if close:
        stream.close()
    return 0


COMMANDS = {
    "train": cmd_train,
    "energy": cmd_energy,
    "spectrum": cmd_spectrum,
    "sample": cmd_sample,
    "ed": cmd_ed,
    "compare": cmd_compare,
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="schmidt-tns", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=name in ("train", "ed", "compare"))
        s.add_argument("--checkpoint")
        s.add_argument("--out")
        s.add_argument("--seed", type=int)
        s.add_argument("--top", type=int, default=5)
        s.add_argument("--samples", type=int, default=1000)
    return p


def run(argv=None) -> int:
    """Entry point; returns the exit code."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else _error("usage", "invalid command line", 1)
    if args.top < 1:
        return _error("config", "--top must be >= 1", 1)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        return _error("config", str(err), 1)
    except CheckpointError as err:
        return _error("checkpoint", str(err), 2)
    except TrainingDiverged as err:
        return _error("diverged", str(err), 2)
    except (ConvergenceError, ContractionError, ArithmeticError, RuntimeError, ValueError,
            np.linalg.LinAlgError) as err:
        return _error("numerical", f"{type(err).__name__}: {err}", 2)


def main() -> None:
    sys.exit(run())
