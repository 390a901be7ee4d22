"""Command-line front door: serve, chat, schema tools, eval runner, replay."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import fixtures
from .backend import build_backend
from .dispatch import MODES, Session, parse_mode, replay_session, step_turn
from .evaluation import load_scenarios, run_suite
from .schema import BUDGET_MODES, minify, parse_tool_schema, registry_budget
from .service import ServiceConfig, create_app, new_session_id
from .toolenv import load_registry
from .turns import read_trajectory


def _registry_from_options(registry_path: str | None, walkthrough: bool = False):
    path = registry_path or os.environ.get("CTXAGENT_REGISTRY")
    if path:
        return load_registry(path)
    return fixtures.it_support_registry() if walkthrough else fixtures.fixture_registry()


def _backend_from_options(backend_spec: str | None, walkthrough: bool = False):
    if backend_spec:
        return build_backend(backend_spec)
    if walkthrough:
        return fixtures.wifi_ticket_backend()
    env_url = os.environ.get("CTXAGENT_BACKEND_URL")
    if env_url:
        return build_backend(env_url if ":" in env_url.split("//")[0] else f"http:{env_url}")
    raise click.UsageError("no backend configured: pass --backend or set CTXAGENT_BACKEND_URL")


@click.group()
def main():
    """Context-efficient agent runtime."""


@main.command()
@click.option("--bind", default="127.0.0.1:8080", show_default=True, help="host:port to listen on")
@click.option("--backend", "backend_spec", default=None, help="scripted:<file> | http:<url> | openai:<url>")
@click.option("--registry", "registry_path", default=None, help="registry manifest path")
@click.option("--max-sessions", default=64, show_default=True)
@click.option("--cors", "cors_origins", multiple=True, help="allowed CORS origin (repeatable)")
@click.option("--trajectory-dir", default=None, help="persist per-session trajectory JSONL here")
@click.option("--ui", "ui_dir", default=None, help="serve built UI assets from this directory")
@click.option("--walkthrough", is_flag=True, help="preload the Wi-Fi ticket fixture (scripted backend, padded prompts)")
def serve(bind, backend_spec, registry_path, max_sessions, cors_origins, trajectory_dir, ui_dir, walkthrough):
    """Run the HTTP service."""
    import uvicorn

    host, _, port = bind.partition(":")
    config = ServiceConfig(
        backend_spec=backend_spec,
        registry_path=registry_path or os.environ.get("CTXAGENT_REGISTRY"),
        max_sessions=max_sessions,
        cors_origins=list(cors_origins) or ["*"],
        trajectory_dir=trajectory_dir,
        ui_dir=ui_dir,
        walkthrough=walkthrough,
    )
    uvicorn.run(create_app(config), host=host or "127.0.0.1", port=int(port or 8080))


@main.command()
@click.option("--backend", "backend_spec", default=None)
@click.option("--registry", "registry_path", default=None)
@click.option("--mode", default="mem", show_default=True, type=click.Choice(sorted(MODES)))
@click.option("--walkthrough", is_flag=True, help="use the Wi-Fi ticket fixture backend and prompts")
@click.option("--show-state", is_flag=True, help="print the state log and cache lens after each turn")
def chat(backend_spec, registry_path, mode, walkthrough, show_state):
    """Terminal REPL over the same engine the service uses."""
    registry = _registry_from_options(registry_path, walkthrough)
    backend = _backend_from_options(backend_spec, walkthrough)
    config = fixtures.wifi_ticket_config() if walkthrough else None
    session = Session(new_session_id(), parse_mode(mode), registry, backend, config=config)
    click.echo(f"session {session.id} mode={mode} registry={registry.id} ({len(registry)} tools)")
    click.echo("type a message, or /quit to exit\n")
    while True:
        try:
            text = click.prompt("you", prompt_suffix="> ")
        except (EOFError, click.Abort):
            break
        if text.strip() in ("/quit", "/exit"):
            break
        for turn in step_turn(session, text):
            if turn.role == "user":
                continue
            ctx = f" ctx={turn.input_context_tokens}" if turn.input_context_tokens else ""
            click.echo(f"[{turn.role}/{turn.kind}{ctx}] {turn.content}")
        if show_state:
            click.echo("--- state log ---\n" + session.state.text)
            click.echo(
                f"--- cache --- executor perm={session.executor_cache.permanent_len} "
                f"eph={session.executor_cache.ephemeral_len} | tracker perm={session.tracker_cache.permanent_len} "
                f"eph={session.tracker_cache.ephemeral_len}"
            )


@main.group()
def schema():
    """Tool-schema utilities."""


@schema.command("minify")
@click.argument("infile", type=click.Path(exists=True))
@click.option("-o", "--out", "outfile", default=None, help="write to file instead of stdout")
def schema_minify(infile, outfile):
    """Minify one schema (or an array of schemas) to canonical compact lines."""
    with open(infile, encoding="utf-8") as f:
        raw = json.load(f)
    items = raw if isinstance(raw, list) else [raw]
    lines = [minify(parse_tool_schema(item)).text for item in items]
    output = "\n".join(lines) + "\n"
    if outfile:
        Path(outfile).write_text(output, encoding="utf-8")
    else:
        sys.stdout.write(output)


@schema.command("budget")
@click.argument("registry_path", type=click.Path(exists=True))
@click.option("--mode", default="full-compact", show_default=True, type=click.Choice(BUDGET_MODES))
@click.option("--json", "as_json", is_flag=True, help="emit JSON instead of the text table")
def schema_budget(registry_path, mode, as_json):
    """Token budget of a registry under one prompt-construction mode."""
    registry = load_registry(registry_path)
    report = registry_budget(registry.schemas(), mode)
    if as_json:
        click.echo(json.dumps(report.to_json(), indent=2))
    else:
        click.echo(report.to_table())


@main.group(name="eval")
def eval_group():
    """Evaluation harness."""


@eval_group.command("run")
@click.option("--scenarios", "scenario_dir", default=None, help="directory of scenario JSON files (default: bundled)")
@click.option("--modes", default="baseline,mem", show_default=True, help="comma-separated agent modes")
@click.option("--repeats", default=3, show_default=True)
@click.option("--out", "out_dir", default="eval_out", show_default=True)
@click.option("--registry", "registry_path", default=None)
@click.option("--max-turns", default=25, show_default=True)
def eval_run(scenario_dir, modes, repeats, out_dir, registry_path, max_turns):
    """Run scenario suites and emit report.json, series.csv and charts."""
    scenarios = load_scenarios(scenario_dir or fixtures.scenario_dir())
    registry = _registry_from_options(registry_path)
    mode_list = [m.strip() for m in modes.split(",") if m.strip()]
    report = run_suite(
        scenarios,
        mode_list,
        repeats=repeats,
        registry=registry,
        max_assistant_turns=max_turns,
        out_dir=out_dir,
    )
    for category, by_mode in report.categories.items():
        for mode_name, summary in by_mode.items():
            click.echo(
                f"{category:22s} {mode_name:9s} "
                f"P={summary['precision']['mean']:.2f} R={summary['recall']['mean']:.2f} "
                f"F1={summary['f1']['mean']:.2f} slope={summary['slope']['mean']:.1f} tok/turn"
            )
    click.echo(f"report written to {out_dir}/")


@main.command()
@click.argument("trajectory", type=click.Path(exists=True))
@click.option("--registry", "registry_path", default=None)
def replay(trajectory, registry_path):
    """Rebuild a session from a trajectory JSONL and verify the snapshots."""
    meta, turns = read_trajectory(trajectory)
    registry = _registry_from_options(registry_path) if registry_path else None
    if registry is None or registry.id != meta.registry_id:
        for candidate in (fixtures.fixture_registry(), fixtures.it_support_registry()):
            if candidate.id == meta.registry_id:
                registry = candidate
                break
    if registry is None:
        raise click.UsageError(f"registry {meta.registry_id!r} not found; pass --registry")
    session = replay_session(meta, turns, registry)
    recorded = [t for t in turns if t.role == "assistant"]
    rebuilt = [t for t in session.turns if t.role == "assistant"]
    ok_counts = [r.input_context_tokens for r in recorded] == [r.input_context_tokens for r in rebuilt]
    click.echo(f"replayed {len(turns)} rows -> {len(session.turns)} rows")
    click.echo(f"state log version {session.state.version}, text:\n{session.state.text}")
    click.echo(
        f"cache: executor perm={session.executor_cache.permanent_len} "
        f"tracker perm={session.tracker_cache.permanent_len}"
    )
    click.echo(f"context accounting matches recording: {ok_counts}")
    if not ok_counts:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
