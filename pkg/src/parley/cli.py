"""Command line entry points: serve, chat, eval, report."""

from __future__ import annotations

import json
import sys
from importlib import resources
from pathlib import Path

import click

from .errors import EngineError
from .harness import run_suite
from .metrics import LatencyRecorder
from .model import SessionConfig, StageLatencies
from .synthetic import REFERENCE_MODEL


def _fixture_path(name: str) -> Path:
    return Path(str(resources.files("parley") / "fixtures" / name))


def _load_server_settings(config_path: str | None) -> dict:
    if not config_path:
        return {}
    return json.loads(Path(config_path).read_text(encoding="utf-8"))


@click.group()
def main() -> None:
    """Headless conversational-agent orchestration engine."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8420, show_default=True, type=int)
@click.option("--data-dir", default="./data", show_default=True)
@click.option("--config", "config_path", default=None, help="Server config JSON file.")
@click.option("--ui-dir", default=None, help="Directory of operator UI static files.")
@click.option("--seed", default=0, show_default=True, type=int)
def serve(host: str, port: int, data_dir: str, config_path: str | None,
          ui_dir: str | None, seed: int) -> None:
    """Host the session service."""
    import uvicorn

    from .adapters.wire import WireConfig
    from .service import SessionManager, build_app, default_registry

    settings = _load_server_settings(config_path)
    data_dir = settings.get("data_dir", data_dir)
    wire = None
    if "http_llm" in settings:
        raw = settings["http_llm"]
        wire = WireConfig(
            base_url=raw["base_url"],
            model=raw.get("model", "default"),
            auth_env=raw.get("auth_env", "CHAT_API_KEY"),
            timeout_ms=int(raw.get("timeout_ms", 60_000)),
        )
    script = settings.get("mock_script", str(_fixture_path("replies.json")))
    registry = default_registry(mock_script_path=script, wire_config=wire)
    manager = SessionManager(
        data_dir=data_dir, registry=registry, seed=settings.get("seed", seed)
    )
    app = build_app(
        manager,
        scenario_path=_fixture_path("scenarios.json"),
        ui_dir=ui_dir,
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--url", default="http://127.0.0.1:8420", show_default=True)
@click.option("--llm", "llm_backend", default="echo", show_default=True)
@click.option("--once", default=None, help="Send one message and exit.")
def chat(url: str, llm_backend: str, once: str | None) -> None:
    """Interactive terminal session against a running local service."""
    import httpx

    client = httpx.Client(base_url=url, timeout=120.0)
    created = client.post("/sessions", json={"config": {"backends": {
        "stt": "mock", "vision": "mock", "llm": llm_backend, "tts": "mock"}}})
    created.raise_for_status()
    session_id = created.json()["session_id"]
    click.echo(f"session {session_id}")

    def send(text: str) -> None:
        response = client.post(f"/sessions/{session_id}/turns", json={"text": text})
        if response.status_code != 200:
            click.echo(f"error {response.status_code}: {response.text}")
            return
        body = response.json()
        if not body.get("committed"):
            click.echo("(nothing happened)")
            return
        click.echo(body["assistant_text"])
        latencies = body["stage_latencies"]
        click.echo(f"  [total {latencies['total_ms']:.0f} ms]")

    if once is not None:
        send(once)
        return
    click.echo("type a message, or /quit")
    while True:
        try:
            line = input("> ").strip()
        except (EOFError, KeyboardInterrupt):
            break
        if line in ("/quit", "/exit"):
            break
        if line:
            send(line)


@main.command(name="eval")
@click.option("--scenarios", "scenario_path", default=None, type=click.Path(),
              help="Scenario suite JSON (defaults to the shipped fixtures).")
@click.option("--script", "script_path", default=None, type=click.Path(),
              help="Scripted replies JSON (defaults to the shipped fixtures).")
@click.option("--out", "out_dir", default=None, type=click.Path(),
              help="Directory for report artifacts.")
@click.option("--limit", default=None, type=int, help="Feedback attempt limit override.")
def eval_command(scenario_path: str | None, script_path: str | None,
                 out_dir: str | None, limit: int | None) -> None:
    """Run a scenario suite and print the phase report."""
    scenario_path = scenario_path or _fixture_path("scenarios.json")
    script_path = script_path or _fixture_path("replies.json")
    config = SessionConfig()
    if limit is not None:
        config.feedback_attempt_limit = limit
    try:
        report = run_suite(scenario_path, script_path, config=config, out_dir=out_dir)
    except EngineError as exc:
        click.echo(f"eval failed: {exc}", err=True)
        sys.exit(2)
    click.echo(report.to_text(), nl=False)
    if report.any_failure:
        sys.exit(1)


@main.command()
@click.option("--samples", "samples_path", default=None, type=click.Path(exists=True),
              help="Per-turn latency CSV produced by eval (latencies.csv).")
@click.option("--synthetic", is_flag=True, help="Summarize synthetic reference samples.")
@click.option("--n", default=10_000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def report(samples_path: str | None, synthetic: bool, n: int, seed: int) -> None:
    """Print latency distribution statistics (mean, std, p99 per stage)."""
    recorder = LatencyRecorder()
    if synthetic:
        for sample in REFERENCE_MODEL.sample(n, seed=seed):
            recorder.record("synthetic", sample)
    elif samples_path:
        import csv as csv_module

        with open(samples_path, encoding="utf-8") as handle:
            for row in csv_module.DictReader(handle):
                recorder.record(
                    row.get("session_id", "csv"),
                    StageLatencies(
                        stt_ms=float(row["stt_ms"]),
                        vision_ms=float(row["vision_ms"]),
                        llm_ms=float(row["llm_ms"]),
                        tts_ms=float(row["tts_ms"]),
                        residual_ms=float(row["residual_ms"]),
                        total_ms=float(row["total_ms"]),
                    ),
                )
    else:
        click.echo("provide --samples or --synthetic", err=True)
        sys.exit(2)
    click.echo(recorder.to_table(), nl=False)


if __name__ == "__main__":
    main()
