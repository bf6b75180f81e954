"""Command-line front end: ``simulate``, ``sweep-eta`` and ``transition-probe``.

Every command reads a spec document (a path, or a bundled preset name such as
``fig1.spec``) and writes one CSV. Exit codes: 0 success, 2 invalid spec,
3 unwritable output.
"""

from __future__ import annotations

import csv
import io
import logging
import sys
from pathlib import Path

import click

from shufflegame.baselines import PolicyKind
from shufflegame.game import ConfigError
from shufflegame.harness import estimate_transition_distribution, run_experiment
from shufflegame.specdoc import SpecDocument, load_spec, override

EXIT_SPEC = 2
EXIT_OUTPUT = 3

SIMULATE_HEADER = ("t", "policy", "effectiveness", "cost", "defender_payoff",
                   "attacker_payoff", "crashed_vms", "trials")
SWEEP_HEADER = ("eta", "policy", "effectiveness", "cost", "payoff")
PROBE_HEADER = ("state_pattern", "count", "frequency")

POLICY_CHOICE = click.Choice([k.value for k in PolicyKind])


def _fail_spec(exc: Exception) -> None:
    field = getattr(exc, "field", None)
    prefix = f"invalid spec field {field!r}: " if field else "invalid spec: "
    click.echo(prefix + str(exc), err=True)
    sys.exit(EXIT_SPEC)


def _load(spec_path: str, seed=None, trials=None, policies=()) -> SpecDocument:
    try:
        return override(load_spec(spec_path), seed=seed, trials=trials, policies=policies or None)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        _fail_spec(exc)


def _fmt(x) -> str:
    return repr(float(x))


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _write(out_path: str, text: str) -> None:
    try:
        Path(out_path).write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        click.echo(f"cannot write {out_path}: {exc}", err=True)
        sys.exit(EXIT_OUTPUT)


def _check_writable(out_path: str) -> None:
    # fail before spending minutes on a run whose output cannot land
    p = Path(out_path)
    if p.is_dir() or not p.parent.exists():
        click.echo(f"cannot write {out_path}: no such directory or path is a directory", err=True)
        sys.exit(EXIT_OUTPUT)


def simulate_rows(doc: SpecDocument) -> list[tuple]:
    rows = []
    for policy in doc.policies:
        series = run_experiment(doc.for_policy(policy))
        mean = series.mean
        for i, t in enumerate(series.index):
            rows.append((int(t), policy.value, _fmt(mean["effectiveness"][i]), _fmt(mean["cost"][i]),
                         _fmt(mean["defender_payoff"][i]), _fmt(mean["attacker_payoff"][i]),
                         _fmt(mean["crashed_vms"][i]), series.trials))
    return rows


def sweep_rows(doc: SpecDocument) -> list[tuple]:
    rows = []
    for policy in doc.policies:
        series = run_experiment(doc.for_policy(policy))
        mean = series.mean
        for i, eta in enumerate(series.index):
            rows.append((int(eta), policy.value, _fmt(mean["effectiveness"][i]), _fmt(mean["cost"][i]),
                         _fmt(mean["defender_payoff"][i])))
    return rows


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def main(verbose: int) -> None:
    """Attacker/defender shuffling game simulator."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--spec", "spec_path", required=True, help="Spec file or preset name.")
@click.option("--out", "out_path", required=True, help="Output CSV path.")
@click.option("--seed", type=int, default=None, help="Override the spec seed.")
@click.option("--trials", type=int, default=None, help="Override the trial count.")
@click.option("--policy", "policies", type=POLICY_CHOICE, multiple=True,
              help="Policy to run (repeatable); overrides the spec list.")
def simulate(spec_path, out_path, seed, trials, policies):
    """Per-timestep means for each policy."""
    doc = _load(spec_path, seed, trials, policies)
    if doc.experiment.eta.kind == "sweep":
        _fail_spec(ConfigError("eta_mode", "sweep mode needs the sweep-eta command"))
    _check_writable(out_path)
    _write(out_path, render_csv(SIMULATE_HEADER, simulate_rows(doc)))


@main.command("sweep-eta")
@click.option("--spec", "spec_path", required=True, help="Spec file or preset name.")
@click.option("--out", "out_path", required=True, help="Output CSV path.")
@click.option("--seed", type=int, default=None, help="Override the spec seed.")
@click.option("--trials", type=int, default=None, help="Override the trial count.")
@click.option("--policy", "policies", type=POLICY_CHOICE, multiple=True,
              help="Policy to run (repeatable); overrides the spec list.")
def sweep_eta(spec_path, out_path, seed, trials, policies):
    """Metrics at the evaluation step for every online-user count."""
    doc = _load(spec_path, seed, trials, policies)
    if doc.experiment.eta.kind != "sweep":
        _fail_spec(ConfigError("eta_mode", "sweep-eta needs eta_mode = \"sweep\""))
    _check_writable(out_path)
    _write(out_path, render_csv(SWEEP_HEADER, sweep_rows(doc)))


@main.command("transition-probe")
@click.option("--spec", "spec_path", required=True, help="Spec file or preset name.")
@click.option("--out", "out_path", required=True, help="Output CSV path.")
@click.option("--seed", type=int, default=None, help="Override the spec seed.")
@click.option("--runs", type=int, default=None, help="Number of draws (spec probe_runs, else 10000).")
def transition_probe(spec_path, out_path, seed, runs):
    """Histogram of next states from the spec's probe state."""
    doc = _load(spec_path, seed)
    if runs is not None and runs < 1:
        _fail_spec(ConfigError("runs", "must be >= 1"))
    probe = doc.probe
    _check_writable(out_path)
    est = estimate_transition_distribution(
        doc.experiment.config, runs=runs or probe.runs, state=probe.state,
        observation=probe.observation, attack=probe.attack, defend=probe.defend,
        seed=doc.experiment.seed)
    freq = est.frequencies
    rows = [(k, c, _fmt(freq[k])) for k, c in est.patterns.items()]
    _write(out_path, render_csv(PROBE_HEADER, rows))


if __name__ == "__main__":
    main()
