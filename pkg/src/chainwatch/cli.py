"""Command line entry point: serve, demo, replay, report.

Exit codes: 0 ok, 1 domain error, 2 usage error. Threshold and schedule
defaults can be overridden by a config file (JSON or key=value lines)
and, above that, by repeated --set key=value flags.
"""
from __future__ import annotations

import json
import sys
import threading
import time
from pathlib import Path
from typing import Optional

import click
import httpx
import uvicorn

from .client import HttpSink
from .errors import ChainwatchError
from .report import build_report
from .runlog import RecordingSink, replay_into_store
from .samplers import MODEL_NAMES, SamplerConfig, builtin_model, run_sampler
from .server import AnalysisEngine, AnalysisSchedule, create_app
from .store import RunStore
from .warnings_engine import Thresholds
from . import wire

DEMO_BASE: dict[str, dict] = {
    "linreg": dict(algorithm="hmc", step_size=0.05, n_leapfrog=20, chains=4, tune=500, draws=2000),
    "eight_schools_centered": dict(algorithm="hmc", step_size=0.2, n_leapfrog=10, chains=4, tune=100, draws=3000),
    "eight_schools_noncentered": dict(algorithm="hmc", step_size=0.5, n_leapfrog=8, chains=4, tune=1000, draws=3000),
    "neal_funnel": dict(algorithm="hmc", step_size=0.25, n_leapfrog=10, chains=4, tune=500, draws=3000),
}

FAULT_PROFILES = ("default", "small_step", "large_step", "wild_proposals", "short_tune")


def _apply_profile(base: dict, profile: str) -> dict:
    cfg = dict(base)
    if profile == "small_step":
        cfg["step_size"] = base["step_size"] * 0.05
    elif profile == "large_step":
        cfg["step_size"] = base["step_size"] * 25.0
    elif profile == "wild_proposals":
        cfg["algorithm"] = "random_walk_mh"
        cfg["step_size"] = 1e6
        cfg.pop("n_leapfrog", None)
    elif profile == "short_tune":
        cfg["tune"] = 50
    return cfg


# --- configuration -------------------------------------------------------------

def _parse_value(raw: str):
    raw = raw.strip()
    if "," in raw:
        return [_parse_value(part) for part in raw.split(",")]
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        f = float(raw)
        return int(f) if f.is_integer() and "." not in raw and "e" not in lowered else f
    except ValueError:
        return raw


def _set_nested(tree: dict, dotted: str, value) -> None:
    parts = dotted.split(".")
    node = tree
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def load_config_file(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return json.loads(text)
    tree: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise ChainwatchError(f"{path}:{lineno}: expected key=value")
        _set_nested(tree, key.strip(), _parse_value(raw))
    return tree


def build_settings(config: Optional[str], sets: tuple[str, ...]) -> tuple[Thresholds, AnalysisSchedule]:
    """Precedence: --set flags > config file > defaults."""
    tree: dict = {}
    if config:
        tree = load_config_file(config)
    for item in sets:
        key, sep, raw = item.partition("=")
        if not sep:
            raise click.UsageError(f"--set expects key=value, got {item!r}")
        _set_nested(tree, key.strip(), _parse_value(raw))

    thresholds = Thresholds()
    schedule = AnalysisSchedule()
    flat = {k: v for k, v in tree.items() if k not in ("thresholds", "schedule")}
    merged = {**tree.get("thresholds", {}), **flat}
    for key, value in merged.items():
        if key == "acceptance_bands":
            for algo, band in value.items():
                thresholds.acceptance_bands[algo] = (float(band[0]), float(band[1]))
        elif hasattr(thresholds, key):
            current = getattr(thresholds, key)
            setattr(thresholds, key, type(current)(value) if current is not None else value)
        elif key in ("every_n_iterations", "max_interval"):
            setattr(schedule, key, type(getattr(schedule, key))(value))
        else:
            raise ChainwatchError(f"unknown configuration key {key!r}")
    for key, value in tree.get("schedule", {}).items():
        if not hasattr(schedule, key):
            raise ChainwatchError(f"unknown schedule key {key!r}")
        setattr(schedule, key, type(getattr(schedule, key))(value))
    thresholds.validate()
    schedule.validate()
    return thresholds, schedule


def _start_server(app, host: str, port: int):
    config = uvicorn.Config(app, host=host, port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if not thread.is_alive() or time.monotonic() > deadline:
            raise ChainwatchError(f"server failed to start on {host}:{port}")
        time.sleep(0.02)
    actual_port = server.servers[0].sockets[0].getsockname()[1]
    return server, thread, actual_port


@click.group()
def main():
    """Online MCMC inference debugger."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--config", type=click.Path(exists=True), default=None, help="JSON or key=value config file.")
@click.option("--set", "sets", multiple=True, metavar="KEY=VALUE", help="Override a config entry.")
@click.option("--spill-dir", type=click.Path(), default=None, help="Record incoming runs as JSONL logs here.")
@click.option("--ui-dir", type=click.Path(exists=True), default=None,
              help="Serve a built web UI from this directory at /ui.")
def serve(host, port, config, sets, spill_dir, ui_dir):
    """Run the diagnostics engine until interrupted."""
    thresholds, schedule = build_settings(config, sets)
    app = create_app(thresholds=thresholds, schedule=schedule, spill_dir=spill_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


class _CapturingSink(HttpSink):
    """HttpSink that publishes the issued run_id for the watcher thread."""

    def __init__(self, box: dict, **kwargs):
        super().__init__(**kwargs)
        self._box = box

    def create_run(self, descriptor, metadata):
        run_id = super().create_run(descriptor, metadata)
        self._box["run_id"] = run_id
        return run_id


def _watch_timeline(base_url: str, box: dict, stop: threading.Event, printed: set):
    client = httpx.Client(base_url=base_url, timeout=10.0)
    since = 0
    while not stop.is_set():
        run_id = box.get("run_id")
        if run_id is None:
            time.sleep(0.05)
            continue
        try:
            payload = client.get(
                f"/api/v1/runs/{run_id}/events", params={"since": since, "wait": 1.0}
            ).json()["payload"]
        except Exception:
            time.sleep(0.2)
            continue
        since = payload["next_since"]
        if any(ev["kind"] == "warning-diff" for ev in payload["events"]):
            feed = client.get(f"/api/v1/runs/{run_id}/warnings").json()["payload"]
            for w in feed["new"] + feed["persisting"]:
                if w["id"] not in printed:
                    printed.add(w["id"])
                    names = ", ".join(v["name"] for v in w["variables"]) or "run"
                    click.echo(f"  [{w['last_seen']:>6}] + {w['kind']} ({w['severity']}) {names} — {w['suggestion']}")
            for w in feed["resolved"]:
                key = f"resolved:{w['id']}"
                if key not in printed:
                    printed.add(key)
                    names = ", ".join(v["name"] for v in w["variables"]) or "run"
                    click.echo(f"  [{w['last_seen']:>6}] - resolved {w['kind']} {names}")


@main.command()
@click.option("--model", "model_name", type=click.Choice(MODEL_NAMES), required=True)
@click.option("--fault-profile", type=click.Choice(FAULT_PROFILES), default="default", show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--port", default=0, show_default=True, help="0 picks a free port.")
@click.option("--chains", type=int, default=None)
@click.option("--tune", type=int, default=None)
@click.option("--draws", type=int, default=None)
@click.option("--step-size", type=float, default=None)
@click.option("--n-leapfrog", type=int, default=None)
@click.option("--algorithm", type=click.Choice(["hmc", "random_walk_mh"]), default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--record", type=click.Path(), default=None, help="Tee the run into a JSONL log.")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--set", "sets", multiple=True, metavar="KEY=VALUE")
def demo(model_name, fault_profile, seed, port, chains, tune, draws, step_size,
         n_leapfrog, algorithm, batch_size, record, config, sets):
    """Boot a local engine, stream a seeded run into it, print the warnings timeline."""
    thresholds, schedule = build_settings(config, sets)
    cfg_kwargs = _apply_profile(DEMO_BASE[model_name], fault_profile)
    overrides = dict(chains=chains, tune=tune, draws=draws, step_size=step_size,
                     n_leapfrog=n_leapfrog, algorithm=algorithm, batch_size=batch_size)
    cfg_kwargs.update({k: v for k, v in overrides.items() if v is not None})
    cfg = SamplerConfig(seed=seed, **cfg_kwargs)
    model = builtin_model(model_name)

    app = create_app(thresholds=thresholds, schedule=schedule)
    server, thread, actual_port = _start_server(app, "127.0.0.1", port)
    base_url = f"http://127.0.0.1:{actual_port}"
    click.echo(f"engine listening on {base_url}")
    click.echo(f"demo run: {model_name} profile={fault_profile} algorithm={cfg.algorithm} "
               f"step_size={cfg.step_size} chains={cfg.chains} tune={cfg.tune} draws={cfg.draws} seed={seed}")

    box: dict = {}
    stop_evt = threading.Event()
    printed: set = set()
    watcher = threading.Thread(
        target=_watch_timeline, args=(base_url, box, stop_evt, printed), daemon=True
    )
    watcher.start()
    sink = _CapturingSink(box, base_url=base_url)
    if record:
        sink = RecordingSink(sink, record)
    try:
        outcome, run_id = run_sampler(model, cfg, sink)
    finally:
        time.sleep(0.2)  # let the watcher drain the final diff
        stop_evt.set()
        watcher.join(timeout=3.0)
    click.echo(f"run {run_id} {outcome}")

    client = httpx.Client(base_url=base_url, timeout=10.0)
    info = client.get(f"/api/v1/runs/{run_id}").json()["payload"]
    stats = client.get(f"/api/v1/runs/{run_id}/stats").json()["payload"]["rows"]
    warnings = client.get(f"/api/v1/runs/{run_id}/warnings").json()["payload"]
    click.echo("")
    click.echo(build_report(info, stats, warnings, "text"), nl=False)
    server.should_exit = True
    thread.join(timeout=5.0)
    if record:
        click.echo(f"recorded log: {record}")


@main.command()
@click.argument("log_path", type=click.Path(exists=True))
@click.option("--report", "with_report", is_flag=True, help="Print the full diagnostics report.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True)
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--set", "sets", multiple=True, metavar="KEY=VALUE")
def replay(log_path, with_report, fmt, config, sets):
    """Replay a recorded JSONL batch log offline and report on it."""
    thresholds, schedule = build_settings(config, sets)
    store = RunStore()
    engine = AnalysisEngine(store, thresholds, schedule, auto_start=False)
    run_id = replay_into_store(log_path, store)
    run = store.get(run_id)
    if run.status == "running":  # logs without a finish record still get a final state
        store.finish_run(run_id, "finished")
    diag = engine.evaluate_now(run_id)
    info = {
        "run_id": run_id,
        "status": run.status,
        "metadata": wire.metadata_to_wire(run.metadata),
        "progress": {str(c): p for c, p in run.progress().items()},
    }
    rows = [wire.stats_to_wire(r) for r in diag.stats]
    warnings = engine.warning_feed(run_id)
    if with_report:
        click.echo(build_report(info, rows, warnings, fmt), nl=False)
    else:
        n_active = len(warnings["new"]) + len(warnings["persisting"])
        click.echo(f"replayed {run_id}: status={run.status} active_warnings={n_active}")


@main.command()
@click.argument("run_id")
@click.option("--url", default="http://127.0.0.1:8000", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True)
def report(run_id, url, fmt):
    """Fetch stats and warnings for a run from a live engine and print a report."""
    client = httpx.Client(base_url=url, timeout=10.0)
    resp = client.get(f"/api/v1/runs/{run_id}")
    if resp.status_code == 404:
        raise ChainwatchError(f"unknown run {run_id!r}")
    resp.raise_for_status()
    info = resp.json()["payload"]
    stats = client.get(f"/api/v1/runs/{run_id}/stats").json()["payload"]["rows"]
    warnings = client.get(f"/api/v1/runs/{run_id}/warnings").json()["payload"]
    click.echo(build_report(info, stats, warnings, fmt), nl=False)


def entry() -> None:
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.exceptions.Abort:
        sys.exit(2)
    except ChainwatchError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except httpx.HTTPError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    entry()
