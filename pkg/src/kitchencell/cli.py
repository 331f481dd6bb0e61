"""Command-line interface: schedule, simulate, trajectory, layout, serve."""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path

import click

from . import schemas
from .engine import engine_from_scenario
from .gantt import build_gantt, render_svg, render_text
from .layout import AnnealConfig, NoFeasibleFound, optimize_layout
from .model import Assignment, TaskStatus
from .scheduler import JsspInstance, SolveStatus, SolverConfig, solve
from .trajectory import solve_min_jerk, solve_min_jerk_linf

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_TIMED_OUT = 3


@click.group()
def main() -> None:
    """Kitchen-cell orchestration tools."""


def _schedule_json(schedule, names) -> dict:
    return {
        "schema": schemas.SCHEMA_TAG,
        "makespan_s": schedule.makespan_s,
        "assignments": [
            {
                "recipe_index": a.key[0],
                "task_index": a.key[1],
                "name": names.get(a.key, ""),
                "machine": a.machine,
                "start_s": a.start_s,
                "end_s": a.end_s,
                "status": a.status.value,
            }
            for a in schedule.assignments
        ],
    }


def _task_names(orders) -> dict:
    return {t.key: t.name for o in orders for t in o.tasks}


@main.command()
@click.argument("recipes", type=click.Path(exists=True))
@click.argument("machines", type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--budget-ms", default=30_000, show_default=True)
@click.option(
    "--format", "fmt",
    type=click.Choice(["json", "gantt-text", "svg"]),
    default="json", show_default=True,
)
@click.option("--out", type=click.Path(), default=None, help="Write to file.")
def schedule(recipes, machines, seed, budget_ms, fmt, out) -> None:
    """Solve the scheduling problem for RECIPES on MACHINES."""
    try:
        orders_doc = schemas.load_document(recipes, schemas.ORDERS_SCHEMA)
        machines_doc = schemas.load_document(machines, schemas.MACHINES_SCHEMA)
        orders = schemas.orders_from_json(orders_doc)
        machine_list, pairs = schemas.machines_from_json(machines_doc)
    except schemas.SchemaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    instance = JsspInstance(
        orders=orders, machines=machine_list, incompatible_pairs=pairs
    )
    result = solve(
        instance, SolverConfig(time_budget_ms=budget_ms, random_seed=seed)
    )
    if result.status is SolveStatus.INFEASIBLE or result.schedule is None:
        click.echo("infeasible: no schedule satisfies the constraints", err=True)
        sys.exit(EXIT_INFEASIBLE)
    names = _task_names(orders)
    if fmt == "json":
        text = json.dumps(_schedule_json(result.schedule, names), indent=2) + "\n"
    else:
        rows = build_gantt(
            result.schedule.assignments, [m.id for m in machine_list], names
        )
        text = render_text(rows) if fmt == "gantt-text" else render_svg(rows)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)
    if result.status is SolveStatus.TIMED_OUT:
        click.echo("warning: time budget exhausted; best incumbent shown", err=True)
        sys.exit(EXIT_TIMED_OUT)
    sys.exit(EXIT_OK)


@main.command()
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--seed", default=None, type=int, help="Override the scenario seed.")
@click.option("--until-s", default=None, type=float, help="Stop at this sim time.")
@click.option("--events-out", type=click.Path(), default=None)
def simulate(scenario, seed, until_s, events_out) -> None:
    """Run a scenario to completion and print its event log."""
    try:
        doc = schemas.load_document(scenario, schemas.SCENARIO_SCHEMA)
    except schemas.SchemaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    if seed is not None:
        doc.setdefault("sim", {})["seed"] = seed
    try:
        engine = engine_from_scenario(doc)
    except (schemas.SchemaError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    if until_s is not None:
        engine.run_until(until_s)
    else:
        engine.run_to_completion()
    text = "\n".join(engine.log_lines()) + "\n"
    if events_out:
        Path(events_out).write_text(text)
    else:
        click.echo(text, nl=False)
    sys.exit(EXIT_OK)


@main.command()
@click.argument("problem", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default=None, help="CSV output path.")
def trajectory(problem, out) -> None:
    """Solve a trajectory problem; write t, x, v, a, j sample columns as CSV."""
    try:
        doc = schemas.load_document(problem, schemas.TRAJECTORY_SCHEMA)
        prob = schemas.trajectory_problem_from_json(doc)
    except (schemas.SchemaError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    solver = (
        solve_min_jerk_linf if doc.get("objective") == "linf" else solve_min_jerk
    )
    traj = solver(prob)
    buf = io.StringIO()
    writer = csv.writer(buf)
    dims = traj.position.shape[1]
    header = ["t"]
    for label in ("x", "v", "a", "j"):
        header += [f"{label}{d}" for d in range(dims)]
    writer.writerow(header)
    for k, t in enumerate(traj.times):
        row = [f"{t:.9g}"]
        for arr in (traj.position, traj.velocity, traj.acceleration, traj.jerk):
            row += [f"{arr[k, d]:.9g}" for d in range(dims)]
        writer.writerow(row)
    text = buf.getvalue()
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)
    sys.exit(EXIT_OK)


@main.command()
@click.argument("problem", type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--iterations", default=6000, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def layout(problem, seed, iterations, out) -> None:
    """Optimize appliance placement for a layout problem."""
    try:
        doc = schemas.load_document(problem, schemas.LAYOUT_SCHEMA)
        prob = schemas.layout_problem_from_json(doc)
    except (schemas.SchemaError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    try:
        result = optimize_layout(
            prob, seed=seed, config=AnnealConfig(iterations=iterations)
        )
    except NoFeasibleFound as exc:
        click.echo(f"infeasible: {exc}", err=True)
        sys.exit(EXIT_INFEASIBLE)
    payload = {
        "schema": schemas.SCHEMA_TAG,
        "objective": result.objective,
        "placements": [
            {
                "name": spec.name,
                "x": pl.x,
                "y": pl.y,
                "yaw": pl.yaw,
            }
            for spec, pl in zip(prob.appliances, result.placements)
        ],
        "feasible": result.report.feasible,
    }
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)
    sys.exit(EXIT_OK)


@main.command()
@click.argument("machines", type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True,
              envvar="KITCHENCELL_HOST")
@click.option("--port", default=8000, show_default=True,
              envvar="KITCHENCELL_PORT")
@click.option("--rate", default=1.0, show_default=True,
              help="Sim seconds per wall second.")
def serve(machines, host, port, rate) -> None:
    """Run the HTTP service for a kitchen cell with the given MACHINES file."""
    import uvicorn

    from .service import create_app

    try:
        doc = schemas.load_document(machines, schemas.MACHINES_SCHEMA)
    except schemas.SchemaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_ERROR)
    app = create_app(doc, rate=rate)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
