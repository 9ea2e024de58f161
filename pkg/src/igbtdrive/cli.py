"""Command-line front end.

    igbtdrive run --config run.ini            # experiment named in the config
    igbtdrive sweep --config run.ini --out out/
    igbtdrive edge|compare --config run.ini [--dt 5e-11]
    igbtdrive fom --input edge.csv            # or --config with [experiment] input
"""

from __future__ import annotations

import argparse
import hashlib
import io
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import edge_signature, switching_energy
from .config import ConfigError, RunConfig, load_config
from .experiments import (
    CONVENTION,
    compare_at_equal_loss,
    evaluate_csp,
    evaluate_drive,
    sweep_i3,
    tradeoff_csv,
)
from .gate_drive import TURN_ON, CspDesignInputs, CspProfile, csp_steps_csv, design_csp
from .transient_sim import Waveforms

COMMANDS = {"edge": "edge", "sweep": "sweep", "compare": "compare", "fom": "fom-on-file"}


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


class _Writer:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: list[tuple[str, str]] = []

    def write(self, name: str, text: str) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        (self.out_dir / name).write_bytes(data)
        self.files.append((name, hashlib.sha256(data).hexdigest()))


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StageError(name, exc) from exc


def _mA(x: float) -> str:
    return f"{x * 1e3:g}mA".replace(".", "p")


def _run_edge(cfg: RunConfig, w: _Writer) -> None:
    entry = cfg.drive(cfg.experiment.drive)
    dev, circ, sim = cfg.device, cfg.circuit, cfg.sim
    if isinstance(entry.value, CspDesignInputs):
        drive = _stage(f"design of drive {entry.name!r}", design_csp, dev, circ, entry.value)
    else:
        drive = entry.value
    if isinstance(drive, CspProfile):
        w.write(f"csp_steps_{entry.name}.csv", csp_steps_csv(drive))
    res = _stage(
        f"simulation of drive {entry.name!r}",
        evaluate_drive,
        drive,
        dev,
        circ,
        sim,
        entry.name,
        getattr(entry.value, "i_3", None),
        cfg.experiment.duty,
    )
    loss = switching_energy(res.on, res.off, dev, circ)
    swing = circ.v_bus - circ.v_ce_sat
    w.write(f"waveform_{entry.name}_on.csv", res.on.to_csv())
    w.write(f"waveform_{entry.name}_off.csv", res.off.to_csv())
    w.write(f"loss_{entry.name}.csv", loss.to_csv())
    w.write(f"signature_{entry.name}_on.csv", edge_signature(res.on, swing).to_csv())
    w.write(f"signature_{entry.name}_off.csv", edge_signature(res.off, swing).to_csv())
    w.write(f"spectrum_{entry.name}.csv", res.record.spectrum.to_csv())
    w.write(f"tradeoff_{entry.name}.csv", tradeoff_csv([res.record]))
    print(f"{entry.name}: p_sw = {loss.p_sw:.6g} W, FOM = {res.record.fom:.6g}")


def _run_sweep(cfg: RunConfig, w: _Writer) -> None:
    entry = cfg.drive(cfg.experiment.drive)
    if not isinstance(entry.value, CspDesignInputs):
        raise StageError("sweep", ConfigError(f"drive {entry.name!r} must be a CSP given by design inputs"))
    ex = cfg.experiment
    records = _stage(
        "sweep",
        sweep_i3,
        entry.value,
        list(ex.i3_values),
        cfg.device,
        cfg.circuit,
        cfg.sim,
        duty=ex.duty,
        workers=ex.workers,
    )
    w.write("tradeoff.csv", tradeoff_csv(records))
    for r in records:
        w.write(f"spectrum_i3_{_mA(r.i_3)}.csv", r.spectrum.to_csv())
    for r in records:
        print(f"I3 = {r.i_3 * 1e3:g} mA: p_sw = {r.p_sw:.6g} W, FOM = {r.fom:.6g}")


def _run_compare(cfg: RunConfig, w: _Writer) -> None:
    ex = cfg.experiment
    entry = cfg.drive(ex.drive)
    ref = cfg.drive(ex.reference)
    if not isinstance(entry.value, CspDesignInputs):
        raise StageError("compare", ConfigError(f"drive {entry.name!r} must be a CSP given by design inputs"))
    if isinstance(ref.value, CspProfile):
        raise StageError("compare", ConfigError("reference drive must not be an explicit step table"))
    target = None
    if ex.target_loss.strip().lower() != "reference":
        try:
            target = float(ex.target_loss)
        except ValueError:
            raise StageError("compare", ConfigError("[experiment] target_loss must be 'reference' or a number")) from None
    bounds = None
    if ex.tune_min is not None or ex.tune_max is not None:
        if ex.tune_min is None or ex.tune_max is None:
            raise StageError("compare", ConfigError("give both tune_min and tune_max"))
        bounds = (ex.tune_min, ex.tune_max)
    rep = _stage(
        "comparison",
        compare_at_equal_loss,
        entry.value,
        ref.value,
        cfg.device,
        cfg.circuit,
        cfg.sim,
        target_p=target,
        tune=ex.tune,
        bounds=bounds,
        duty=ex.duty,
    )
    w.write("comparison_tradeoff.csv", tradeoff_csv([rep.csp_record, rep.cats_record]))
    w.write("spectrum_csp.csv", rep.spectra[0].to_csv())
    w.write(f"spectrum_{rep.cats_record.drive_id}.csv", rep.spectra[1].to_csv())
    w.write("comparison_summary.txt", rep.summary())
    sys.stdout.write(rep.summary())


def _run_fom(path: Path, w: _Writer | None) -> float:
    text = _stage("reading edge file", path.read_text, encoding="utf-8")
    wave = _stage("parsing edge file", _edge_from_csv, text)
    sig = _stage("edge signature", edge_signature, wave)
    if w is not None:
        w.write("signature.csv", sig.to_csv())
    print(f"sigma_t = {sig.sigma_t:.6g} s, sigma_w = {sig.sigma_w:.6g} rad/s, FOM contribution = {sig.product:.6g}")
    return sig.product


def _edge_from_csv(text: str) -> Waveforms:
    """Accept either the full waveform CSV or a two-column ``t_s,v_ce_V`` file."""
    header = text.splitlines()[0].split(",")
    if len(header) >= 5:
        return Waveforms.from_csv(text)
    data = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
    t, v = data[:, 0], data[:, 1]
    z = np.zeros_like(v)
    dt = float(np.mean(np.diff(t)))
    if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=0):
        raise ValueError("edge CSV is not uniformly sampled")
    return Waveforms(dt, float(t[0]), z, v, z.copy(), z.copy(), TURN_ON)


def _manifest(cfg: RunConfig | None, command: str, inputs: list[Path], w: _Writer) -> str:
    lines = [f"# igbtdrive {__version__} run manifest", f"command = {command}"]
    for p in inputs:
        digest = hashlib.sha256(p.read_bytes()).hexdigest()
        lines.append(f"input = {p} sha256:{digest}")
    if cfg is not None:
        lines.append("")
        lines.append("# parameters (source: config, default or override)")
        section = None
        for sec, key, value, origin in cfg.echo:
            if sec != section:
                lines.append(f"[{sec}]")
                section = sec
            lines.append(f"{key} = {value}  ; {origin}")
        if command == "compare":
            lines.append("")
            lines.append(f"# {CONVENTION}")
    lines.append("")
    lines.append("# outputs")
    for name, digest in w.files:
        lines.append(f"output = {name} sha256:{digest}")
    return "\n".join(lines) + "\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="igbtdrive", description="IGBT gate-drive switching transient studies")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "edge", "sweep", "compare", "fom"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=name != "fom")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides [output] dir)")
        p.add_argument("--dt", type=float, default=None, help="simulation step override (s)")
        p.add_argument("--seed", type=int, default=None, help="reserved; the simulation is deterministic")
        if name == "fom":
            p.add_argument("--input", type=Path, default=None, help="edge CSV (t_s,v_ce_V or full waveform)")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.dt) if args.config else None
        kind = cfg.experiment.kind if args.command == "run" else COMMANDS[args.command]
        out_dir = args.out or (cfg.output_dir if cfg else Path("out"))
        w = _Writer(out_dir)
        inputs = [args.config] if args.config else []
        if kind == "edge":
            _run_edge(cfg, w)
        elif kind == "sweep":
            _run_sweep(cfg, w)
        elif kind == "compare":
            _run_compare(cfg, w)
        else:
            edge_file = getattr(args, "input", None) or (Path(cfg.experiment.input) if cfg and cfg.experiment.input else None)
            if edge_file is None:
                raise ConfigError("fom needs --input or [experiment] input")
            inputs.append(edge_file)
            _run_fom(edge_file, w)
        w.write("manifest.txt", _manifest(cfg, kind, inputs, w))
    except ConfigError as exc:
        print(f"igbtdrive: config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"igbtdrive: failed during {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
