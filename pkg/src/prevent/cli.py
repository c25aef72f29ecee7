"""Command line front end: single runs, batch experiments, the service and
tree-file validation."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import dsl
from .experiments import ExperimentError, run_fig7, run_single, run_table1, run_table2
from .skills import stub_registry


@click.group()
def main():
    """Hazard-aware skill runner and experiment harness."""


@main.command("run")
@click.option("--scenario", required=True, help="shipped scenario id (S1..S6, T1_NH, ...)")
@click.option("--skill", type=click.Choice(["cin", "ibm"]), default=None,
              help="must match the scenario's skill; defaults to it")
@click.option("--mode", type=click.Choice(["skilled", "nse"]), default="skilled")
@click.option("--seed", type=int, default=None)
@click.option("--auto-consent", "auto_consent", type=float, default=None,
              help="answer continue this many seconds after each alert")
@click.option("--out", type=click.Path(path_type=Path), default=Path("runs"))
def run_command(scenario, skill, mode, seed, auto_consent, out):
    """Execute one scenario and write record, event and tick-trace files."""
    try:
        result = run_single(
            scenario, mode=mode, seed=seed, auto_consent=auto_consent,
            out_dir=out, skill=skill,
        )
    except ExperimentError as exc:
        raise click.ClickException(str(exc)) from None
    click.echo(json.dumps({k: v for k, v in result.items() if k != "alerts"}, indent=2))


@main.command("experiment")
@click.argument("name", type=click.Choice(["fig7", "table1", "table2"]))
@click.option("--out", type=click.Path(path_type=Path), default=Path("reports"))
@click.option("--seed", type=int, default=123)
def experiment_command(name, out, seed):
    """Run one of the shipped experiment reproductions."""
    runner = {"fig7": run_fig7, "table1": run_table1, "table2": run_table2}[name]
    report = runner(seed=seed, out_dir=out)
    click.echo(report.to_text())
    click.echo(f"wrote {out}/{name}.csv and {out}/{name}_report.txt")


@main.command("serve")
@click.option("--port", type=int, default=8787)
@click.option("--bind", default="127.0.0.1")
@click.option("--console", "console_dir", type=click.Path(path_type=Path), default=None,
              help="directory with the built operator console; mounted at /console")
def serve_command(port, bind, console_dir):
    """Start the session service."""
    from .service.app import serve

    if console_dir is None and (Path("frontend") / "index.html").exists():
        console_dir = Path("frontend")
    click.echo(f"serving on http://{bind}:{port}")
    if console_dir is not None:
        click.echo(f"console at http://{bind}:{port}/console/")
    serve(bind=bind, port=port, console_dir=console_dir)


@main.command("validate")
@click.argument("tree_file", type=click.Path(exists=True, path_type=Path))
def validate_command(tree_file):
    """Parse and validate a .bt tree file."""
    try:
        doc = dsl.parse_file(tree_file)
    except dsl.DslError as exc:
        click.echo(f"parse error: {exc}", err=True)
        sys.exit(1)
    diagnostics = dsl.validate(doc, stub_registry())
    if diagnostics:
        for diag in diagnostics:
            click.echo(str(diag), err=True)
        sys.exit(1)
    node_count = sum(1 for _ in doc.root.walk())
    click.echo(f"{tree_file}: ok ({node_count} nodes)")


if __name__ == "__main__":
    main()
