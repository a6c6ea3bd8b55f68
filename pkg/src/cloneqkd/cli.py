"""``cloneqkd`` command-line workbench.

Each command prints a plain-text summary.  With ``--output DIR`` it also
writes tab-separated tables and a ``manifest.json`` holding the canonical
config, the library version and a SHA-256 of every output file.
``cloneqkd replay DIR/manifest.json`` reruns the recorded config and
checks that every file is reproduced byte for byte.

Outputs are first written to a scratch directory next to the target and
moved into place only after the command succeeds, so a failed run leaves
no partial files behind.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import shutil
import sys
import tempfile

import numpy as np

from . import __version__
from .cloner import ClonerParams, OpticalModel, OPTICS_PRESETS, SingularOpticsError, success_probability
from .config import COMMANDS, ConfigError, build_config, dumps, load
from .eavesdropper import joint_distribution
from .montecarlo import RunConfig, emulated_states, empirical_report, run_rounds
from .protocols import get_protocol
from .qstate import uhlmann_fidelity
from .security import analyze, optimize_attack, privacy_bound, security_map
from .source_model import DetectorModel, source_report
from .tomography import ml_reconstruct, simulate_counts

MANIFEST = "manifest.json"
SUMMARY = "summary.txt"
OPTIMA = {"bb84": (0.5, 1 / 3), "r04": (4 / 7, 4 / 11)}


def fmt(v):
    """Six significant digits, trailing zeros kept."""
    if v is None:
        return "n/a"
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if not np.isfinite(v):
        return str(v)
    return f"{v:#.6g}"


def pct(v):
    return f"{100 * v:#.6g}%"


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(c) if not isinstance(c, str) else c for c in row])


def _params(cfg):
    return ClonerParams.from_lambda2(cfg.p, cfg.lambda2)


def _p_s(params, preset, protocol):
    try:
        v = success_probability(params, OpticalModel.preset(preset), protocol)
    except SingularOpticsError:
        return None
    return v if np.isfinite(v) else None


def _report_rows(rep):
    rows = [("qber", rep.qber), ("i_ab", rep.i_ab), ("i_ae", rep.i_ae), ("i_be", rep.i_be),
            ("key_rate", rep.key_rate)]
    for key, err in sorted((rep.stderr or {}).items()):
        if np.isscalar(err):
            rows.append((f"{key}_stderr", err))
    return rows


def cmd_analyze(cfg, out):
    params = _params(cfg)
    rep = analyze(cfg.protocol, params)
    lines = [
        f"protocol {cfg.protocol}",
        f"p = {fmt(params.p)}  lambda2 = {fmt(params.lambda2)}",
        f"QBER = {pct(rep.qber)}",
        f"I_AB = {fmt(rep.i_ab)}  I_AE = {fmt(rep.i_ae)}  I_BE = {fmt(rep.i_be)}",
        f"key_rate = {fmt(rep.key_rate)}",
    ]
    rows = [("p", params.p), ("lambda2", params.lambda2)] + _report_rows(rep)
    for preset in sorted(OPTICS_PRESETS):
        ps = _p_s(params, preset, cfg.protocol)
        lines.append(f"p_s ({preset} optics) = {fmt(ps)}")
        rows.append((f"p_s_{preset}", ps))
    if out:
        _write_rows(os.path.join(out, "report.tsv"), ("quantity", "value"), rows)
    return lines


def cmd_optimize(cfg, out):
    params, rep = optimize_attack(cfg.protocol, cfg.grid_step)
    pb_q, pb_params = privacy_bound(cfg.protocol, cfg.grid_step)
    lines = [
        f"protocol {cfg.protocol}",
        f"p* = {fmt(params.p)}  lambda2* = {fmt(params.lambda2)}",
        f"QBER = {pct(rep.qber)}  key_rate = {fmt(rep.key_rate)}",
        f"I_AB = {fmt(rep.i_ab)}  I_AE = {fmt(rep.i_ae)}  I_BE = {fmt(rep.i_be)}",
        f"privacy bound QBER = {pct(pb_q)} at p = {fmt(pb_params.p)}, lambda2 = {fmt(pb_params.lambda2)}",
    ]
    rows = [("p", params.p), ("lambda2", params.lambda2)] + _report_rows(rep)
    rows += [("privacy_qber", pb_q), ("privacy_p", pb_params.p), ("privacy_lambda2", pb_params.lambda2)]
    for preset in sorted(OPTICS_PRESETS):
        ps = _p_s(params, preset, cfg.protocol)
        lines.append(f"p_s ({preset} optics) = {fmt(ps)}")
        rows.append((f"p_s_{preset}", ps))
    if out:
        _write_rows(os.path.join(out, "optimum.tsv"), ("quantity", "value"), rows)
    return lines


def cmd_map(cfg, out):
    smap = security_map(cfg.protocol, cfg.resolution)
    key = smap.values["key_rate"]
    lines = [
        f"protocol {cfg.protocol}",
        f"grid {len(smap.p)} x {len(smap.lambda2)}",
        f"fraction with key_rate > 0: {fmt(float(np.mean(key > 0)))}",
        f"key_rate = 0 contour: {len(smap.contours)} polyline(s), "
        f"{sum(len(c) for c in smap.contours)} vertices",
    ]
    if out:
        smap.write_table(os.path.join(out, "map.tsv"))
        smap.write_contours(os.path.join(out, "contours.tsv"))
    return lines


def cmd_simulate(cfg, out):
    params = _params(cfg)
    run = RunConfig(cfg.protocol, params, cfg.rounds, cfg.seed, cfg.noise, cfg.sifted)
    result = run_rounds(run)
    rep = empirical_report(result, seed=cfg.seed)
    exact = joint_distribution(cfg.protocol, params).qber
    lines = [
        f"protocol {cfg.protocol}  seed {cfg.seed}",
        f"rounds {result.rounds}  sifted {result.sifted_count}",
        f"QBER = {pct(rep.qber)} +/- {pct(rep.stderr['qber'])} (noise-free analytic {pct(exact)})",
        f"key_rate = {fmt(rep.key_rate)} +/- {fmt(rep.stderr['key_rate'])}",
        f"fingerprint {result.fingerprint()}",
    ]
    if out:
        result.write_counts(os.path.join(out, "counts.tsv"))
        rows = [("rounds", result.rounds), ("sifted", result.sifted_count)] + _report_rows(rep)
        _write_rows(os.path.join(out, "report.tsv"), ("quantity", "value"), rows)
    return lines


def cmd_source_check(cfg, out):
    det = DetectorModel(cfg.eta, cfg.window_ns, cfg.dead_time_ns, cfg.clicks)
    rep = source_report(det)
    lines = [
        f"clicks {fmt(cfg.clicks)} /s  window {fmt(cfg.window_ns)} ns  eta {fmt(cfg.eta)}",
        f"P0 = {fmt(rep.p0)}",
        f"lambda = {fmt(rep.mean_photons)}",
        f"P(n>1) = {fmt(rep.p_multiphoton)}",
        f"vacuum probability over dead time {fmt(cfg.dead_time_ns)} ns = {fmt(rep.dead_time_vacuum)}",
    ]
    if out:
        _write_rows(os.path.join(out, "source.tsv"), ("quantity", "value"), list(rep.as_dict().items()))
    return lines


def cmd_tomo_demo(cfg, out):
    spec = get_protocol(cfg.protocol)
    p, l2 = (cfg.p, cfg.lambda2) if cfg.p is not None and cfg.lambda2 is not None else OPTIMA[spec.kind]
    params = ClonerParams.from_lambda2(p, l2)
    true = emulated_states(spec, params, 1.0 if cfg.purity is None else cfg.purity)
    est = np.empty_like(true)
    rows, lines = [], [f"protocol {spec.kind}  p = {fmt(p)}  lambda2 = {fmt(l2)}  shots {cfg.shots}"]
    for x in (0, 1):
        for j in range(spec.n_alice):
            rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, x, j]))
            counts = simulate_counts(true[x, j], shots=cfg.shots, seed=rng)
            fit = ml_reconstruct(counts)
            est[x, j] = fit.rho
            f = uhlmann_fidelity(true[x, j], fit.rho)
            rows.append((f"x{x}_a{j}", f, int(fit.converged), int(fit.monotone)))
            if out:
                counts.write(os.path.join(out, f"counts_x{x}_a{j}.tsv"))
    q_true = joint_distribution(spec, params, states=true).qber
    q_est = joint_distribution(spec, params, states=est).qber
    lines.append("fidelities " + " ".join(f"{r[0]}={fmt(r[1])}" for r in rows))
    lines.append(f"QBER from true states {pct(q_true)}, from reconstructions {pct(q_est)}")
    if out:
        _write_rows(os.path.join(out, "tomography.tsv"), ("component", "fidelity", "converged", "monotone"), rows)
        _write_rows(os.path.join(out, "qber.tsv"), ("quantity", "value"),
                    [("qber_true", q_true), ("qber_estimate", q_est)])
    return lines


HANDLERS = {
    "analyze": cmd_analyze,
    "optimize": cmd_optimize,
    "map": cmd_map,
    "simulate": cmd_simulate,
    "source-check": cmd_source_check,
    "tomo-demo": cmd_tomo_demo,
}


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def run_into(cfg, directory):
    """Run a command writing into ``directory``; returns summary lines."""
    lines = HANDLERS[cfg.command](cfg, directory)
    if directory:
        with open(os.path.join(directory, SUMMARY), "w") as fh:
            fh.write("\n".join(lines) + "\n")
        outputs = {n: _sha256(os.path.join(directory, n)) for n in sorted(os.listdir(directory))}
        manifest = {
            "tool": "cloneqkd",
            "version": __version__,
            "command": cfg.command,
            "config": dumps(cfg),
            "outputs": outputs,
        }
        with open(os.path.join(directory, MANIFEST), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return lines


def execute(cfg, stdout=None):
    """Run a validated config; write files only if the whole run succeeds."""
    stdout = stdout or sys.stdout
    if not cfg.output:
        lines = run_into(cfg, None)
    else:
        target = os.path.abspath(cfg.output)
        parent = os.path.dirname(target.rstrip(os.sep)) or "."
        scratch = tempfile.mkdtemp(prefix=".cloneqkd-", dir=parent)
        try:
            lines = run_into(cfg, scratch)
            os.makedirs(target, exist_ok=True)
            for name in sorted(os.listdir(scratch)):
                os.replace(os.path.join(scratch, name), os.path.join(target, name))
        finally:
            shutil.rmtree(scratch, ignore_errors=True)
    stdout.write("\n".join(lines) + "\n")
    return 0


def replay(manifest_path, output=None, stdout=None):
    """Rerun a manifest's config and compare every output hash."""
    stdout = stdout or sys.stdout
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    cfg = build_config(None, manifest["config"], source=str(manifest_path))
    scratch = tempfile.mkdtemp(prefix=".cloneqkd-replay-")
    try:
        run_into(cfg, scratch)
        with open(os.path.join(scratch, MANIFEST)) as fh:
            fresh = json.load(fh)["outputs"]
        expected = manifest["outputs"]
        mismatched = sorted(n for n in set(expected) | set(fresh) if expected.get(n) != fresh.get(n))
        if output:
            os.makedirs(output, exist_ok=True)
            for name in sorted(os.listdir(scratch)):
                shutil.copy(os.path.join(scratch, name), os.path.join(output, name))
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    if mismatched:
        stdout.write("replay differs in: " + ", ".join(mismatched) + "\n")
        return 1
    stdout.write(f"replay identical: {len(expected)} files\n")
    return 0


_OPTIONS = (
    ("--protocol", str, "bb84 or r04"),
    ("--p", str, "cloner asymmetry p"),
    ("--lambda2", str, "cloning strength Lambda^2"),
    ("--optics", str, "optics preset"),
    ("--resolution", str, "grid points per axis (map)"),
    ("--grid-step", str, "coarse grid spacing (optimize)"),
    ("--rounds", str, "number of rounds (simulate)"),
    ("--sifted", str, "count rounds as sifted rounds (true/false)"),
    ("--seed", str, "random seed"),
    ("--noise", str, "white-noise admixture weight"),
    ("--purity", str, "target purity for noise emulation (tomo-demo)"),
    ("--clicks", str, "detector clicks per second"),
    ("--window-ns", str, "coincidence window in ns"),
    ("--dead-time-ns", str, "detector dead time in ns"),
    ("--eta", str, "detector efficiency"),
    ("--shots", str, "shots per projector (tomo-demo)"),
)


def build_parser():
    parser = argparse.ArgumentParser(prog="cloneqkd", description="Cloning-attack analysis for BB84 and R04.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("-o", "--output", help="directory for tables and the run manifest")
        for flag, typ, helptext in _OPTIONS:
            sp.add_argument(flag, type=typ, default=None, help=helptext)
    rp = sub.add_parser("replay", help="rerun a manifest and verify its outputs")
    rp.add_argument("manifest")
    rp.add_argument("-o", "--output", help="also keep the regenerated files here")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            return replay(args.manifest, args.output)
        overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config") and v is not None}
        if args.config:
            cfg = load(args.config, args.command, overrides)
        else:
            cfg = build_config(args.command, None, overrides)
        return execute(cfg)
    except ConfigError as exc:
        sys.stderr.write(f"cloneqkd: {exc}\n")
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        sys.stderr.write(f"cloneqkd: error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
