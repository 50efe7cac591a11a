"""Command-line entry points.

Exit-code contract: 0 full success, 1 configuration or fatal error,
2 partial success (some tasks failed). Result files are written
atomically and every output references its run manifest.
"""

from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import harness, protocol as protocol_mod, runner
from .config import RunConfig, build_manifest, write_json_atomic
from .errors import RevalError
from .evidence import EvidenceCache
from .protocol import CreationContext
from .scoring import METRICS, Scorecard, aggregate

logger = logging.getLogger(__name__)


def _load_config(config_path: str | None, **overrides) -> RunConfig:
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if config_path:
        return RunConfig.from_file(config_path, **overrides)
    return RunConfig(**overrides)


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True),
                      help="JSON run-config file.")(fn)
    fn = click.option("--mode", "backend_mode",
                      type=click.Choice(["live", "record", "replay"]),
                      default=None, help="Judge backend mode.")(fn)
    fn = click.option("--provider", type=click.Choice(["http", "stub"]),
                      default=None)(fn)
    fn = click.option("--fixtures", "fixture_dir", type=click.Path(),
                      default=None, help="Judge fixture directory.")(fn)
    fn = click.option("--search-fixtures", type=click.Path(exists=True),
                      default=None)(fn)
    fn = click.option("--fetch-fixtures", type=click.Path(exists=True),
                      default=None)(fn)
    fn = click.option("--results-dir", type=click.Path(), default=None)(fn)
    fn = click.option("--protocol-dir", type=click.Path(), default=None)(fn)
    fn = click.option("--workers", type=int, default=None)(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--today", default=None, help="ISO date for temporal context.")(fn)
    fn = click.option("--cutoff-date", default=None,
                      help="ISO date; strict evidence cutoff.")(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose: bool):
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


def _read_manifest(path: str) -> list[runner.TaskSpec]:
    obj = json.loads(Path(path).read_text("utf-8"))
    base = Path(path).parent
    specs = []
    for row in obj["tasks"]:
        report_path = row.get("report")
        specs.append(runner.TaskSpec(
            task_id=row["task_id"], query=row["query"],
            report_path=str(base / report_path) if report_path else ""))
    return specs


@main.command("protocol-create")
@click.argument("manifest", type=click.Path(exists=True))
@_common_options
def cmd_protocol_create(manifest, config_path, **overrides):
    """Build one evaluation protocol per task in MANIFEST."""
    try:
        config = _load_config(config_path, **overrides)
        specs = _read_manifest(manifest)
        gateway = config.make_gateway()
        ctx = CreationContext(
            gateway=gateway,
            search_backend=config.make_search_backend(),
            fetch_backend=config.make_fetch_backend(),
            max_results=config.max_results)
        if config.today:
            from datetime import date
            ctx.today = date.fromisoformat(config.today)
    except (RevalError, OSError, ValueError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    failures = 0
    for spec in specs:
        try:
            ctx.cache = EvidenceCache(config.cache_dir, namespace=spec.task_id)
            proto = protocol_mod.create_protocol(
                spec.task_id, spec.query, ctx,
                created_at=config.today or "unset",
                budget=config.creation_budget)
            path = Path(config.protocol_dir) / f"{spec.task_id}.protocol.json"
            protocol_mod.save_protocol(proto, path)
            click.echo(f"{spec.task_id}: protocol written to {path}")
        except (RevalError, OSError) as exc:
            failures += 1
            click.echo(f"{spec.task_id}: FAILED ({exc})", err=True)
    if failures == len(specs):
        sys.exit(1)
    sys.exit(2 if failures else 0)


@main.command("evaluate")
@click.argument("manifest", type=click.Path(exists=True))
@click.option("--metrics", default="wq,factuality,ci,da,kic,rq",
              help="Comma-separated subset of wq,factuality,ci,da,kic,rq.")
@_common_options
def cmd_evaluate(manifest, metrics, config_path, **overrides):
    """Evaluate every report in MANIFEST, writing per-task scorecards."""
    try:
        config = _load_config(config_path, **overrides)
        specs = _read_manifest(manifest)
        selected = tuple(m.strip() for m in metrics.split(",") if m.strip())
        unknown = set(selected) - set(runner.ALL_METRICS)
        if unknown:
            raise RevalError(f"unknown metrics: {sorted(unknown)}")
        run_manifest = build_manifest(
            config, {"manifest": manifest,
                     **{s.task_id: s.report_path for s in specs}})
    except (RevalError, OSError, ValueError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    results_dir = Path(config.results_dir)
    failures = 0

    def run_one(spec: runner.TaskSpec) -> tuple[runner.TaskSpec, Exception | None]:
        try:
            out = runner.evaluate_task(spec, config, selected)
            obj = out.scorecard.to_json_obj()
            obj["run_id"] = run_manifest.run_id
            write_json_atomic(results_dir / f"{spec.task_id}.scorecard.json", obj)
            audit_dir = results_dir / "audit"
            for metric, rows in out.audit_rows.items():
                audit_dir.mkdir(parents=True, exist_ok=True)
                path = audit_dir / f"{spec.task_id}.{metric}.jsonl"
                path.write_text(
                    "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows),
                    "utf-8")
            return spec, None
        except (RevalError, OSError) as exc:
            return spec, exc

    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        for spec, exc in pool.map(run_one, specs):
            if exc is None:
                click.echo(f"{spec.task_id}: scorecard written")
            else:
                failures += 1
                click.echo(f"{spec.task_id}: FAILED ({exc})", err=True)

    import time
    run_manifest.ended_at = time.time()
    write_json_atomic(results_dir / f"manifest-{run_manifest.run_id}.json",
                      run_manifest.to_json_obj())
    if failures == len(specs):
        sys.exit(1)
    sys.exit(2 if failures else 0)


@main.command("score")
@click.argument("scorecard_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--results-dir", type=click.Path(), default=None)
def cmd_score(scorecard_dir, results_dir):
    """Aggregate per-task scorecards into a dataset-level table."""
    cards = []
    for path in sorted(Path(scorecard_dir).glob("*.scorecard.json")):
        cards.append(Scorecard.from_json_obj(json.loads(path.read_text("utf-8"))))
    if not cards:
        click.echo("error: no scorecards found", err=True)
        sys.exit(1)
    agg = aggregate(cards)
    header = f"{'task':<24}" + "".join(f"{m.upper():>12}" for m in METRICS)
    click.echo(header)
    for card in cards + [agg]:
        row = f"{card.task_id:<24}"
        for m in METRICS:
            v = getattr(card, m)
            row += f"{'--':>12}" if v is None else f"{float(v) * 100:>12.2f}"
        click.echo(row)
    out_dir = Path(results_dir or scorecard_dir)
    write_json_atomic(out_dir / "aggregate.json", agg.to_json_obj())
    sys.exit(0)


@main.command("sweep")
@click.option("--pairs", "pairs_path", type=click.Path(exists=True), default=None,
              help="Pair file (defaults to the bundled adversarial dataset).")
@click.option("--grid", default=None,
              help="Comma-separated corruption rates; default 0,1/n,...,1.")
@click.option("--oracle/--live", default=True,
              help="Oracle verifier (offline) or the live factuality pipeline.")
@click.option("--seed", type=int, default=None,
              help="Seeded-random false-variant selection.")
@click.option("--results-dir", type=click.Path(), default="results")
def cmd_sweep(pairs_path, grid, oracle, seed, results_dir):
    """Corruption sweep over adversarial claim pairs."""
    try:
        path = pairs_path or harness.bundled_pairs_path()
        pairs = harness.load_pairs(path)
        n = min(len(pairs), harness.DEFAULT_BATCH_SIZE)
        rs = ([float(x) for x in grid.split(",")] if grid
              else harness.default_grid(n))
        if not oracle:
            raise RevalError("live sweep verifier requires provider config; "
                             "use --oracle for the offline run")
        curve = harness.run_sweep(rs, pairs, n=n, seed=seed)
    except (RevalError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    cfg = {"pairs": str(path), "n": n, "seed": seed, "mode": "oracle"}
    out = Path(results_dir)
    write_json_atomic(out / "sweep.json", harness.sweep_to_json_obj(curve, cfg))
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(harness.sweep_to_csv(curve), "utf-8")
    for r, f, a in curve.points:
        click.echo(f"r={r:.4f} factuality={float(f):.4f} alignment={float(a):.4f}")
    sys.exit(0)


@main.command("inspect")
@click.argument("artifact", type=click.Path(exists=True))
def cmd_inspect(artifact):
    """Pretty-print any stored JSON artifact."""
    path = Path(artifact)
    try:
        if path.suffix == ".jsonl":
            for line in path.read_text("utf-8").splitlines():
                click.echo(json.dumps(json.loads(line), indent=2, sort_keys=True))
        else:
            obj = json.loads(path.read_text("utf-8"))
            click.echo(json.dumps(obj, indent=2, sort_keys=True))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        click.echo(f"error: not a JSON artifact: {exc}", err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
