"""Command-line client of the measurement service.

Every subcommand builds a request, sends it through the service layer and
renders the response.  By default the service runs in-process (requests go
through the full HTTP stack via an ASGI transport); ``--server URL`` talks
to a remote instance instead.  Exit codes: 0 success, 1 validation error,
2 numerical failure, 3 I/O error.

Configuration files are JSON documents mirroring the experiment schema;
``--set key=value`` overrides individual fields (value parsed as JSON when
possible).
"""

from __future__ import annotations

import asyncio
import json
import os
import sys
from pathlib import Path

import click
import httpx

_EXIT_CODES = {"validation": 1, "numerical": 2, "io": 3}


def _scratch_dir() -> Path:
    return Path(os.environ.get("HRTFMEAS_SCRATCH", "."))


class ServiceClient:
    """Synchronous facade over the (in-process or remote) service."""

    def __init__(self, server: str | None):
        self._server = server

    def post(self, path: str, payload: dict) -> dict:
        return asyncio.run(self._post(path, payload))

    async def _post(self, path: str, payload: dict) -> dict:
        if self._server:
            transport = None
            base = self._server
        else:
            from .service.app import app
            transport = httpx.ASGITransport(app=app)
            base = "http://hrtfmeas.internal"
        async with httpx.AsyncClient(transport=transport, base_url=base,
                                     timeout=None) as client:
            try:
                response = await client.post(path, json=payload)
            except httpx.HTTPError as err:
                click.echo(f"error [io]: cannot reach service: {err}",
                           err=True)
                raise SystemExit(_EXIT_CODES["io"])
        if response.status_code >= 400:
            try:
                body = response.json()
                category = body.get("category", "io")
                detail = body.get("detail", response.text)
            except ValueError:
                category, detail = "io", response.text
            click.echo(f"error [{category}]: {detail}", err=True)
            raise SystemExit(_EXIT_CODES.get(category, 3))
        return response.json()


def _apply_overrides(config: dict, overrides: tuple) -> dict:
    for item in overrides:
        if "=" not in item:
            click.echo(f"error [validation]: bad --set {item!r}, "
                       "expected key=value", err=True)
            raise SystemExit(1)
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        config[key.strip()] = value
    return config


def _load_config_dict(config_path: str | None, overrides: tuple) -> dict:
    if config_path:
        path = Path(config_path)
        if not path.exists():
            click.echo(f"error [io]: no such config file: {path}", err=True)
            raise SystemExit(3)
        try:
            config = json.loads(path.read_text())
        except json.JSONDecodeError as err:
            click.echo(f"error [validation]: bad JSON in {path}: {err}",
                       err=True)
            raise SystemExit(1)
        if not isinstance(config, dict):
            click.echo(f"error [validation]: {path} must hold a JSON object",
                       err=True)
            raise SystemExit(1)
    else:
        config = {}
    return _apply_overrides(config, overrides)


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Remote service URL (default: run in-process).")
@click.pass_context
def main(ctx, server):
    """Continuous HRTF measurement toolkit."""
    ctx.obj = ServiceClient(server)


_config_opts = [
    click.option("--config", "config_path", default=None,
                 type=click.Path(), help="JSON experiment config."),
    click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                 help="Override a config field (repeatable)."),
]


def _with_config(fn):
    for opt in reversed(_config_opts):
        fn = opt(fn)
    return fn


@main.command("synthesize-hrtf")
@click.option("--angles", default=None,
              help="Comma-separated incidence angles in degrees.")
@click.option("--grid", "grid_spec", default=None, metavar="START:STOP:STEP",
              help="Angle grid, e.g. 0:180:1.")
@click.option("--out", default=None, type=click.Path(),
              help="Archive file to write.")
@click.option("--sample-rate", default=24000.0, show_default=True)
@click.option("--radius", default=0.0875, show_default=True)
@click.option("--source-distance", default=1.5, show_default=True)
@click.option("--force", is_flag=True)
@click.pass_obj
def synthesize_hrtf(client, angles, grid_spec, out, sample_rate, radius,
                    source_distance, force):
    """Synthesize rigid-sphere reference responses."""
    payload = {"sample_rate": sample_rate, "force": force,
               "sphere": {"radius": radius,
                          "source_distance": source_distance}}
    if angles:
        payload["angles"] = [float(a) for a in angles.split(",")]
    if grid_spec:
        parts = grid_spec.split(":")
        if len(parts) != 3:
            click.echo("error [validation]: --grid expects START:STOP:STEP",
                       err=True)
            raise SystemExit(1)
        payload["grid"] = {"start": float(parts[0]), "stop": float(parts[1]),
                           "step": float(parts[2])}
    if out:
        payload["out"] = out
    body = client.post("/v1/synthesize-hrtf", payload)
    click.echo(f"synthesized {len(body['angles'])} responses "
               f"({body['taps']} taps at {body['sample_rate']:g} Hz)"
               + (f" -> {body['archive']}" if body.get("archive") else ""))


@main.command()
@_with_config
@click.option("--velocity", default=180.0, show_default=True,
              help="Rotation velocity in degrees/second.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--force", is_flag=True)
@click.pass_obj
def simulate(client, config_path, overrides, velocity, out_dir, force):
    """Simulate one continuous measurement (WAV + angle track)."""
    config = _load_config_dict(config_path, overrides)
    body = client.post("/v1/simulate",
                       {"config": config, "velocity_deg_per_s": velocity,
                        "out_dir": out_dir, "force": force})
    click.echo(f"simulated {body['samples']} samples "
               f"(SNR {body['achieved_snr_db']:.2f} dB) -> {body['out_dir']}")


@main.command()
@click.option("--mic", required=True, type=click.Path())
@click.option("--mic-channel", default=0, show_default=True)
@click.option("--excitation", default=None, type=click.Path())
@click.option("--source-channels", default=None,
              help="Comma-separated channel indices in the excitation file.")
@click.option("--regen", default=None, metavar="KIND:TAPS:CHANNELS:SEED",
              help="Regenerate the excitation instead of reading a file.")
@click.option("--expect-sample-rate", default=None, type=float)
@click.pass_obj
def ingest(client, mic, mic_channel, excitation, source_channels, regen,
           expect_sample_rate):
    """Validate recorded signals for identification."""
    payload = {"mic": mic, "mic_channel": mic_channel}
    if excitation:
        payload["excitation"] = excitation
    if source_channels:
        payload["source_channels"] = [int(c) for c
                                      in source_channels.split(",")]
    if regen:
        payload["regen"] = _parse_regen(regen)
    if expect_sample_rate is not None:
        payload["expect_sample_rate"] = expect_sample_rate
    body = client.post("/v1/ingest", payload)
    click.echo(f"ok: {body['samples']} samples at {body['sample_rate']:g} Hz,"
               f" {body['channels']} excitation channel(s) "
               f"({body['excitation_kind']})")


def _parse_regen(spec: str) -> dict:
    parts = spec.split(":")
    if len(parts) != 4:
        click.echo("error [validation]: --regen expects "
                   "KIND:TAPS:CHANNELS:SEED", err=True)
        raise SystemExit(1)
    return {"kind": parts[0], "taps": int(parts[1]),
            "channels": int(parts[2]), "seed": int(parts[3])}


@main.command()
@_with_config
@click.option("--method", default="proposed", show_default=True,
              type=click.Choice(["nlms_wn", "nlms_pseq", "diag_kf",
                                 "proposed"]))
@click.option("--mic", required=True, type=click.Path())
@click.option("--mic-channel", default=0, show_default=True)
@click.option("--excitation", default=None, type=click.Path())
@click.option("--source-channels", default=None)
@click.option("--regen", default=None, metavar="KIND:TAPS:CHANNELS:SEED")
@click.option("--angles", "angles_path", default=None, type=click.Path(),
              help="Rotation track (angle.csv) to embed for evaluation.")
@click.option("--out", required=True, type=click.Path(),
              help="Estimate archive to write.")
@click.option("--force", is_flag=True)
@click.pass_obj
def identify(client, config_path, overrides, method, mic, mic_channel,
             excitation, source_channels, regen, angles_path, out, force):
    """Identify time-variant responses from recorded signals."""
    payload = {"config": _load_config_dict(config_path, overrides),
               "method": method, "mic": mic, "mic_channel": mic_channel,
               "out": out, "force": force}
    if excitation:
        payload["excitation"] = excitation
    if source_channels:
        payload["source_channels"] = [int(c) for c
                                      in source_channels.split(",")]
    if regen:
        payload["regen"] = _parse_regen(regen)
    if angles_path:
        payload["angles"] = angles_path
    body = client.post("/v1/identify", payload)
    seg = f" ({body['segments']} segments)" if body["segments"] else ""
    click.echo(f"identified {body['samples']} samples with "
               f"{body['method']}{seg} -> {body['archive']}")


@main.command()
@click.option("--estimates", required=True, type=click.Path(),
              help="Estimate archive produced by experiment/identify.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--paper-literal-average", is_flag=True,
              help="Sum channels without dividing by the channel count.")
@click.option("--force", is_flag=True)
@click.pass_obj
def evaluate(client, estimates, out_dir, paper_literal_average, force):
    """Score a stored estimate archive against regenerated references."""
    body = client.post("/v1/evaluate",
                       {"estimates": estimates, "out_dir": out_dir,
                        "per_channel_average": not paper_literal_average,
                        "force": force})
    click.echo(f"average system distance {body['d_avg_db']:.2f} dB "
               f"(shift-compensated {body['d_avg_shifted_db']:.2f} dB) "
               f"over {body['samples']} samples -> {body['per_sample_csv']}")


@main.command()
@_with_config
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--force", is_flag=True)
@click.option("--dry-run", is_flag=True,
              help="Validate and write the plan, compute nothing.")
@click.pass_obj
def experiment(client, config_path, overrides, out_dir, force, dry_run):
    """Run the configured (method, velocity) sweep."""
    payload = {"config": _load_config_dict(config_path, overrides),
               "out_dir": out_dir, "force": force, "dry_run": dry_run}
    body = client.post("/v1/experiment", payload)
    if body["dry_run"]:
        click.echo(f"dry run ok (config {body['config_hash']}) "
                   f"-> {body['out_dir']}/plan.csv")
        return
    for run in body["runs"]:
        click.echo(f"{run['method']:>10s} @ {run['velocity_deg_per_s']:g} "
                   f"deg/s: {run['d_avg_db']:8.2f} dB "
                   f"(shifted {run['d_avg_shifted_db']:8.2f} dB) "
                   f"[{run['wall_clock_s']:.1f} s]")
    click.echo(f"summary -> {body['summary_csv']}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8787, show_default=True)
def serve(host, port):
    """Run the measurement service."""
    try:
        import uvicorn
    except ImportError:
        click.echo("error [io]: uvicorn not installed "
                   "(pip install hrtfmeas[server])", err=True)
        raise SystemExit(3)
    from .service.app import app
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
