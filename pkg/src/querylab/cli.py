"""Command-line front end: seeded sweeps written as deterministic CSV.

Output is byte-identical for a fixed config and seed: the header echoes the
config (never the worker count or output path), floats are serialized with
repr, and rows are assembled in grid order regardless of scheduling.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import replace

from . import __version__
from .config import KINDS, ExperimentConfig, config_to_text, default_config, load_config
from .errors import ConfigError, QuerylabError
from .experiments import (
    concentration_rows,
    endtoend_rows,
    lemma_rows,
    separation_rows,
)
from .linalg import trace_distance
from .query_sim import DEFAULT_KEY_CAP, average_density, circuit_from_text, run_purified

__all__ = [
    "main",
    "rows_to_csv",
    "trials_to_csv",
    "cmd_verify_lemmas",
    "cmd_separation",
    "cmd_endtoend",
    "cmd_concentration",
    "cmd_circuit_run",
]

ENV_OUT = "QUERYLAB_OUT"
ENV_JOBS = "QUERYLAB_JOBS"

ROW_COLUMNS = ("kind", "params", "measured", "bound", "passed", "seed")
TRIAL_COLUMNS = ("method", "trial", "truth", "label", "estimate", "forward", "inverse", "seed")

# Bias points reported by circuit-run when no config supplies a grid.
_CIRCUIT_RUN_EPS = (0.05, 0.1, 0.2)


def _comment_block(lines) -> str:
    return "".join(f"# {ln}\n" if ln else "#\n" for ln in lines)


def _config_comments(cfg: ExperimentConfig) -> list:
    echo = replace(cfg, out=None)
    return [f"querylab {__version__}"] + config_to_text(echo).rstrip("\n").split("\n")


def rows_to_csv(rows, comment_lines) -> str:
    """Serialize result rows under a '#'-prefixed comment header."""
    buf = io.StringIO()
    buf.write(_comment_block(comment_lines))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ROW_COLUMNS)
    for r in rows:
        bound = "" if r.bound is None else repr(float(r.bound))
        w.writerow([r.kind, repr(r.params), repr(float(r.measured)), bound,
                    int(r.passed), r.seed])
    return buf.getvalue()


def trials_to_csv(records, comment_lines) -> str:
    """Serialize per-trial distinguisher records."""
    buf = io.StringIO()
    buf.write(_comment_block(comment_lines))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for rec in records:
        w.writerow(rec)
    return buf.getvalue()


def cmd_verify_lemmas(cfg: ExperimentConfig, jobs: int = 1):
    return lemma_rows(cfg.q, cfg.eps, cfg.seed, jobs)


def cmd_separation(cfg: ExperimentConfig, jobs: int = 1):
    return separation_rows(cfg, jobs)


def cmd_endtoend(cfg: ExperimentConfig, jobs: int = 1):
    """Returns (summary rows, per-trial records)."""
    return endtoend_rows(cfg, jobs)


def cmd_concentration(cfg: ExperimentConfig, jobs: int = 1):
    return concentration_rows(cfg, jobs)


def cmd_circuit_run(path: str, eps_list=_CIRCUIT_RUN_EPS, cap: int = DEFAULT_KEY_CAP):
    """Run one circuit file exactly and report its bias-advantage profile.

    Returns plain tuples (kind, params, measured) since nothing here is
    random or bounded.
    """
    with open(path, "r", encoding="utf-8") as fh:
        circuit, q = circuit_from_text(fh.read())
    state = run_purified(circuit, key_cap=cap)
    rows = [
        ("circuit_dims", (circuit.d, circuit.aux_dim, q), float(len(circuit.steps))),
        ("circuit_forward_queries", (q,), float(circuit.forward_count)),
        ("circuit_inverse_queries", (q,), float(circuit.inverse_count)),
        ("circuit_keys", (q,), float(len(state.components))),
    ]
    base = average_density(state, 0.0, q).density
    for eps in eps_list:
        adv = 0.0 if eps == 0.0 else float(
            trace_distance(base, average_density(state, eps, q).density))
        rows.append(("circuit_adv", (q, eps), adv))
    return rows


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; defaults are per-command")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.add_argument("--jobs", type=int, help="worker threads (default: all cores)")
    p.add_argument("--cap", type=int, help="histogram key cap override")


def _resolve_jobs(flag_value) -> int:
    if flag_value is not None:
        jobs = flag_value
    elif ENV_JOBS in os.environ:
        raw = os.environ[ENV_JOBS]
        try:
            jobs = int(raw)
        except ValueError:
            raise ConfigError(f"{ENV_JOBS} must be an integer, got {raw!r}")
    else:
        jobs = os.cpu_count() or 1
    if jobs < 1:
        raise ConfigError(f"worker count must be >= 1, got {jobs}")
    return jobs


def _resolve_out(flag_value, cfg_out, default_name: str):
    if flag_value is not None:
        return flag_value
    if cfg_out is not None:
        return cfg_out
    env_dir = os.environ.get(ENV_OUT)
    if env_dir:
        os.makedirs(env_dir, exist_ok=True)
        return os.path.join(env_dir, default_name)
    return None


def _emit(text: str, out_path) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _run_experiment(args) -> int:
    kind = args.command
    cfg = load_config(args.config) if args.config else default_config(kind)
    if cfg.kind != kind:
        raise ConfigError(f"config is for kind {cfg.kind!r} but the command is {kind!r}")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.cap is not None:
        cfg = replace(cfg, cap=args.cap)
    jobs = _resolve_jobs(args.jobs)
    out_path = _resolve_out(args.out, cfg.out, f"{kind}.csv")

    runners = {
        "verify-lemmas": cmd_verify_lemmas,
        "separation": cmd_separation,
        "endtoend": cmd_endtoend,
        "concentration": cmd_concentration,
    }
    result = runners[kind](cfg, jobs)
    records = None
    if kind == "endtoend":
        rows, records = result
    else:
        rows = result

    comments = _config_comments(cfg)
    _emit(rows_to_csv(rows, comments), out_path)
    if records is not None and out_path is not None:
        stem, ext = os.path.splitext(out_path)
        _emit(trials_to_csv(records, comments), f"{stem}_trials{ext or '.csv'}")

    failures = sum(not r.passed for r in rows)
    dest = out_path or "stdout"
    print(f"{kind}: {len(rows)} rows, {failures} failed -> {dest}", file=sys.stderr)
    return 0 if failures == 0 else 1


def _run_circuit(args) -> int:
    eps_list = _CIRCUIT_RUN_EPS
    cap = DEFAULT_KEY_CAP
    if args.config:
        cfg = load_config(args.config)
        eps_list, cap = cfg.eps, cfg.cap
    if args.cap is not None:
        cap = args.cap
    rows = cmd_circuit_run(args.file, eps_list, cap)

    buf = io.StringIO()
    buf.write(_comment_block([f"querylab {__version__}", f"circuit = {args.file}"]))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("kind", "params", "measured"))
    for kind, params, measured in rows:
        w.writerow([kind, repr(params), repr(measured)])
    _emit(buf.getvalue(), _resolve_out(args.out, None, "circuit-run.csv"))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="querylab",
        description="Deterministic sweeps over biased-phase oracle ensembles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "verify-lemmas": "check spectral and phase-moment properties over a grid",
        "separation": "forward-ceiling and inverse-family advantage sweep",
        "endtoend": "distinguisher success rates and query accounting",
        "concentration": "trace concentration tails at the calibrated dimension",
    }
    for kind in KINDS:
        _add_common_flags(sub.add_parser(kind, help=helps[kind]))
    circ = sub.add_parser("circuit-run", help="run one circuit file and report advantages")
    circ.add_argument("file", help="circuit in the text line format")
    _add_common_flags(circ)

    args = parser.parse_args(argv)
    try:
        if args.command == "circuit-run":
            return _run_circuit(args)
        return _run_experiment(args)
    except QuerylabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
