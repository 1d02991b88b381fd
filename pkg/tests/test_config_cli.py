"""Config parsing, sweep assembly, and the CLI surface."""

import ast
import csv
import math
import subprocess
import sys

import numpy as np
import pytest

from querylab import cli, experiments
from querylab.config import (
    KINDS,
    ExperimentConfig,
    config_to_text,
    default_config,
    parse_config,
)
from querylab.errors import ConfigError, ParameterError
from querylab.families import grover_iterate_circuit
from querylab.linalg import trace_distance
from querylab.query_sim import average_density, circuit_to_text, run_purified


# ------------------------------------------------------------------- config


@pytest.mark.parametrize("kind", KINDS)
def test_default_configs_are_valid_and_round_trip(kind):
    cfg = default_config(kind)
    assert cfg.kind == kind
    assert parse_config(config_to_text(cfg)) == cfg


def test_round_trip_preserves_awkward_floats():
    cfg = ExperimentConfig(
        "separation",
        eps=(0.1, 0.30000000000000004, 1e-05, 0.0),
        d=(3,), q=(8,), n=(1, 2), trials=7, seed=12345, cap=99,
        out="results/sep.csv",
    )
    text = config_to_text(cfg)
    again = parse_config(text)
    assert again == cfg
    assert config_to_text(again) == text


def test_parse_reports_line_numbers():
    text = "[experiment]\nkind = separation\nnot-a-pair\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.line == 3

    with pytest.raises(ConfigError) as err:
        parse_config("[experiment]\nkind = separation\n[grid]\neps = 0.1, oops\n")
    assert err.value.line == 4


def test_parse_rejects_duplicates_and_unknown_keys():
    with pytest.raises(ConfigError):
        parse_config("[experiment]\nkind = separation\nseed = 1\nseed = 2\n")
    with pytest.raises(ConfigError):
        parse_config("[experiment]\nkind = separation\nflavor = mint\n")
    with pytest.raises(ConfigError):
        parse_config("[mystery]\nkind = separation\n")


@pytest.mark.parametrize("field,value", [
    ("eps", (1.0,)),
    ("eps", (-0.1,)),
    ("q", (1,)),
    ("n", (0,)),
    ("trials", 0),
    ("cap", 0),
])
def test_config_validation_rejects_bad_values(field, value):
    base = dict(kind="separation", eps=(0.1,), d=(3,), q=(8,), n=(1,),
                trials=1, seed=0, cap=10)
    base[field] = value
    with pytest.raises(ConfigError):
        ExperimentConfig(**base)


def test_config_requires_kind():
    with pytest.raises(ConfigError):
        parse_config("[grid]\neps = 0.1\n")


# -------------------------------------------------------------- experiments


def test_wilson_interval_brackets_the_rate():
    lo, hi = experiments.wilson_interval(90, 100)
    assert lo < 0.9 < hi
    assert 0.0 <= lo and hi <= 1.0
    assert experiments.wilson_interval(0, 50)[0] == 0.0
    assert experiments.wilson_interval(50, 50)[1] == 1.0
    # tighter with more data
    lo2, hi2 = experiments.wilson_interval(900, 1000)
    assert hi2 - lo2 < hi - lo
    with pytest.raises(ParameterError):
        experiments.wilson_interval(0, 0)


def test_cell_seeds_are_stable_and_distinct():
    a = experiments.cell_seed(7, 3)
    assert a == experiments.cell_seed(7, 3)
    seeds = {experiments.cell_seed(7, i) for i in range(200)}
    assert len(seeds) == 200
    assert experiments.cell_seed(8, 3) != a


def test_lemma_rows_pass_on_small_grid():
    rows = experiments.lemma_rows((8, 64), (0.0, 0.1, 0.25), master_seed=1, jobs=2)
    # six checks per (q, eps) cell plus the single large-q limit row
    assert len(rows) == 6 * 6 + 1
    assert all(r.passed for r in rows)
    kinds = {r.kind for r in rows}
    assert "singular_match" in kinds and "mean_limit" in kinds
    assert "mean_window" not in kinds  # both q below the window threshold


def test_lemma_rows_mean_window_only_for_large_q():
    rows = experiments.lemma_rows((257,), (0.1,), master_seed=1)
    window = [r for r in rows if r.kind == "mean_window"]
    assert len(window) == 1
    assert 0.5 < window[0].measured < 1.0


def test_purification_scaling_rows_hit_closed_forms():
    rows = experiments.purification_scaling_rows()
    assert all(r.passed for r in rows)
    slopes = {r.kind: r.measured for r in rows if r.kind.endswith("_slope")}
    assert abs(slopes["pair_shared_slope"] - 2.0) <= 0.05
    assert abs(slopes["pair_swapped_slope"] - 1.0) <= 0.05


def test_separation_requires_n_at_most_q():
    cfg = ExperimentConfig("separation", eps=(0.1,), d=(2,), q=(4,), n=(5,),
                           trials=2, seed=0, cap=10**5)
    with pytest.raises(ParameterError):
        experiments.separation_rows(cfg)


def test_separation_rows_structure_and_bounds():
    cfg = ExperimentConfig("separation", eps=(0.0, 0.1, 0.2), d=(2, 3), q=(8,),
                           n=(1, 2), trials=4, seed=9, cap=10**5)
    rows = experiments.separation_rows(cfg, jobs=2)
    fwd = [r for r in rows if r.kind == "forward_adv"]
    assert len(fwd) == 2 * 2 * 3  # d x n x eps
    for r in fwd:
        d, q, n, eps = r.params
        assert r.bound == 4.0 * n * eps**2 + 1e-9
        assert r.measured <= r.bound and r.passed
    zero = [r for r in fwd if r.params[-1] == 0.0]
    assert zero and all(r.measured == 0.0 for r in zero)
    kinds = {r.kind for r in rows}
    assert {"forward_slope", "inverse_adv", "inverse_slope",
            "matched_adv", "inverse_ratio"} <= kinds


def test_separation_rows_deterministic_across_jobs():
    cfg = ExperimentConfig("separation", eps=(0.05, 0.1), d=(2,), q=(8,), n=(1, 3),
                           trials=3, seed=4, cap=10**5)
    assert experiments.separation_rows(cfg, jobs=1) == experiments.separation_rows(cfg, jobs=4)


def test_endtoend_rows_structure():
    cfg = ExperimentConfig("endtoend", eps=(0.1,), d=(2000,), q=(257,), n=(1,),
                           trials=6, seed=2, cap=10**5)
    rows, records = experiments.endtoend_rows(cfg, jobs=3)
    kinds = [r.kind for r in rows]
    for method in ("estimation", "amplification", "naive"):
        assert f"{method}_success" in kinds
        assert f"{method}_wilson_low" in kinds
        assert f"{method}_mean_forward" in kinds
    assert len(records) == 3 * 6
    methods = {rec[0] for rec in records}
    assert methods == {"estimation", "amplification", "naive"}
    # naive never touches the inverse oracle; estimation must
    naive_inv = [rec[6] for rec in records if rec[0] == "naive"]
    est_inv = [rec[6] for rec in records if rec[0] == "estimation"]
    assert all(v == 0 for v in naive_inv)
    assert all(v > 0 for v in est_inv)
    match = [r for r in rows if r.kind == "estimation_budget_match"]
    assert len(match) == 1 and match[0].passed
    ratios = [r for r in rows if r.kind == "budget_ratio" and r.bound is not None]
    assert len(ratios) == len(experiments.BUDGET_RATIO_BIASES)
    assert all(r.passed for r in ratios)


def test_endtoend_schedule_slopes():
    cfg = ExperimentConfig("endtoend", eps=(0.1,), d=(500,), q=(8,), n=(1,),
                           trials=2, seed=3, cap=10**5)
    rows, _ = experiments.endtoend_rows(cfg)
    by_kind = {r.kind: r for r in rows}
    assert by_kind["estimation_query_slope"].passed
    assert by_kind["naive_query_slope"].passed
    assert abs(by_kind["estimation_query_slope"].measured - 1.0) <= 0.1
    assert abs(by_kind["naive_query_slope"].measured - 2.0) <= 0.1


def test_concentration_rows_fail_below_calibrated_dimension():
    cfg = ExperimentConfig("concentration", eps=(0.1,), d=(400,), q=(8,), n=(1,),
                           trials=200, seed=5, cap=10**5)
    rows = experiments.concentration_rows(cfg)
    gap = [r for r in rows if r.kind == "gap_unbiased_small"]
    assert len(gap) == 1
    assert not gap[0].passed  # d far below the calibrated threshold


def test_concentration_rows_broadcast_and_mismatch():
    cfg = ExperimentConfig("concentration", eps=(0.2, 0.3), d=(1000,), q=(8,), n=(1,),
                           trials=150, seed=5, cap=10**5)
    rows = experiments.concentration_rows(cfg, jobs=2)
    assert {r.params[1] for r in rows} == {0.2, 0.3}
    bad = ExperimentConfig("concentration", eps=(0.1, 0.2, 0.3), d=(10, 20), q=(8,),
                           n=(1,), trials=150, seed=5, cap=10**5)
    with pytest.raises(ParameterError):
        experiments.concentration_rows(bad)


def test_row_seeds_reproduce_tail_fraction():
    # any row can be replayed in isolation from its recorded seed
    from querylab.ensembles import EnsembleSpec, concentration_check

    cfg = ExperimentConfig("concentration", eps=(0.2,), d=(1000,), q=(8,), n=(1,),
                           trials=150, seed=21, cap=10**5)
    rows = experiments.concentration_rows(cfg)
    row = next(r for r in rows if r.kind == "tail_biased")
    t = row.params[3]
    rng = np.random.default_rng(row.seed)
    again = concentration_check(EnsembleSpec("biased", 1000, 8, 0.2), t, 150, rng)
    assert again == row.measured


# --------------------------------------------------------------------- CLI


def _write_config(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return str(p)


SMALL_CONC = """\
[experiment]
kind = concentration
seed = 31
cap = 100000

[grid]
eps = 0.2
d = 2000
q = 8
trials = 150
"""


def test_cli_csv_is_byte_identical_across_jobs(tmp_path, capsys):
    cfg = _write_config(tmp_path, SMALL_CONC)
    outs = []
    for jobs in (1, 4):
        out = tmp_path / f"c{jobs}.csv"
        code = cli.main(["concentration", "--config", cfg, "--jobs", str(jobs),
                         "--out", str(out)])
        assert code in (0, 1)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    header = outs[0].decode().splitlines()
    assert header[0] == "# querylab 0.1.0"
    assert "# kind = concentration" in header
    assert not any("jobs" in ln for ln in header if ln.startswith("#"))


def test_cli_verify_lemmas_zero_bias_only(tmp_path):
    cfg = _write_config(tmp_path, """\
[experiment]
kind = verify-lemmas

[grid]
eps = 0.0
q = 8, 64
""")
    out = tmp_path / "zero.csv"
    assert cli.main(["verify-lemmas", "--config", cfg, "--out", str(out)]) == 0
    body = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
    alpha = [row for row in csv.reader(body) if row[0].startswith("alpha_min")]
    assert alpha
    for row in alpha:
        assert math.isclose(float(row[2]), 1.0, rel_tol=0, abs_tol=1e-12)
        assert row[4] == "1"


def test_cli_seed_changes_output(tmp_path):
    cfg = _write_config(tmp_path, SMALL_CONC)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["concentration", "--config", cfg, "--out", str(a)])
    cli.main(["concentration", "--config", cfg, "--seed", "99", "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()


def test_cli_exit_codes(tmp_path):
    # passing sweep
    ok = _write_config(tmp_path, SMALL_CONC.replace("d = 2000", "d = 80000"))
    assert cli.main(["concentration", "--config", ok,
                     "--out", str(tmp_path / "ok.csv")]) == 0
    # failing rows: dimension far below the calibrated threshold
    fail = _write_config(tmp_path, SMALL_CONC.replace("d = 2000", "d = 50"))
    assert cli.main(["concentration", "--config", fail,
                     "--out", str(tmp_path / "fail.csv")]) == 1
    # malformed config
    broken = tmp_path / "broken.cfg"
    broken.write_text("[experiment]\nkind = concentration\nwhat\n")
    assert cli.main(["concentration", "--config", str(broken)]) == 2
    # kind mismatch
    assert cli.main(["separation", "--config", ok]) == 2


def test_cli_env_output_dir_and_jobs(tmp_path, monkeypatch):
    cfg = _write_config(tmp_path, SMALL_CONC)
    outdir = tmp_path / "results"
    monkeypatch.setenv(cli.ENV_OUT, str(outdir))
    monkeypatch.setenv(cli.ENV_JOBS, "2")
    code = cli.main(["concentration", "--config", cfg])
    assert code in (0, 1)
    assert (outdir / "concentration.csv").exists()
    # explicit flag beats the environment
    explicit = tmp_path / "explicit.csv"
    cli.main(["concentration", "--config", cfg, "--out", str(explicit)])
    assert explicit.exists()
    monkeypatch.setenv(cli.ENV_JOBS, "three")
    assert cli.main(["concentration", "--config", cfg]) == 2


def test_cli_stdout_when_no_out(tmp_path, capsys, monkeypatch):
    monkeypatch.delenv(cli.ENV_OUT, raising=False)
    cfg = _write_config(tmp_path, SMALL_CONC)
    code = cli.main(["concentration", "--config", cfg])
    captured = capsys.readouterr()
    assert code in (0, 1)
    assert captured.out.startswith("# querylab")
    assert "kind,params,measured,bound,passed,seed" in captured.out


def test_cli_endtoend_writes_trials_sibling(tmp_path):
    cfg = _write_config(tmp_path, """\
[experiment]
kind = endtoend
seed = 7
cap = 100000

[grid]
eps = 0.1
d = 1000
q = 257
trials = 4
""")
    out = tmp_path / "e2e.csv"
    code = cli.main(["endtoend", "--config", cfg, "--out", str(out)])
    assert code in (0, 1)
    trials = tmp_path / "e2e_trials.csv"
    assert trials.exists()
    body = [ln for ln in trials.read_text().splitlines() if not ln.startswith("#")]
    assert body[0].split(",")[:4] == ["method", "trial", "truth", "label"]
    assert len(body) == 1 + 3 * 4


def test_cli_circuit_run_matches_direct_computation(tmp_path, capsys):
    circuit = grover_iterate_circuit(3, 2)
    path = tmp_path / "c.txt"
    path.write_text(circuit_to_text(circuit, 8))
    assert cli.main(["circuit-run", str(path)]) == 0
    out = capsys.readouterr().out
    body = [ln for ln in out.splitlines() if not ln.startswith("#")]
    rows = [parts for parts in csv.reader(body) if parts[0] == "circuit_adv"]
    assert len(rows) == 3
    state = run_purified(circuit)
    base = average_density(state, 0.0, 8).density
    for _, params, measured in rows:
        eps = ast.literal_eval(params)[1]
        expected = trace_distance(base, average_density(state, eps, 8).density)
        assert math.isclose(float(measured), expected, rel_tol=0, abs_tol=1e-15)


def test_cli_module_entry_point(tmp_path):
    circuit = grover_iterate_circuit(2, 1)
    path = tmp_path / "c.txt"
    path.write_text(circuit_to_text(circuit, 4))
    proc = subprocess.run([sys.executable, "-m", "querylab", "circuit-run", str(path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "circuit_adv" in proc.stdout
