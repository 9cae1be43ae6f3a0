"""Command-line client.

With ``--server`` every command is an HTTP call to a running service.  Without
it the same routes are served in-process against the state directory, which is
saved back after each command that changes something.
"""

from __future__ import annotations

import json
import os
import secrets
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator

import click
import httpx

from .claims import MalformedCorpus, load_corpus
from .config import BewaConfig, load_config, read_mapping
from .engine import Engine
from .service.app import ServiceSettings, create_app, load_tokens


class Context:
    def __init__(self, server: str | None, state: Path, token: str | None, config: str | None) -> None:
        self.server = server
        self.state = state
        self.token = token
        self.config_path = config

    def config(self) -> BewaConfig:
        return load_config(self.config_path)

    @contextmanager
    def client(self) -> Iterator[httpx.Client]:
        if self.server:
            headers = {"Authorization": f"Bearer {self.token}"} if self.token else {}
            with httpx.Client(base_url=self.server, headers=headers, timeout=60.0) as client:
                yield client
            return
        from fastapi.testclient import TestClient

        engine = Engine.load(self.state, self.config())
        dirty = []
        token = secrets.token_hex(16)
        settings = ServiceSettings(tokens={token: "local"}, rate_limit=sys.maxsize, on_change=dirty.append)
        with TestClient(create_app(engine, settings), headers={"Authorization": f"Bearer {token}"}) as client:
            yield client
        if dirty:
            engine.save(self.state)


def _emit(data: Any) -> None:
    click.echo(json.dumps(data, indent=2, sort_keys=True))


def _call(ctx: Context, method: str, path: str, **kwargs: Any) -> Any:
    with ctx.client() as client:
        resp = client.request(method, path, **kwargs)
    try:
        body = resp.json()
    except ValueError:
        body = {"detail": resp.text}
    if resp.status_code >= 400:
        detail = body.get("detail", body) if isinstance(body, dict) else body
        raise click.ClickException(f"HTTP {resp.status_code}: {detail}")
    return body


def _read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read {path}: {exc}") from exc


@click.group()
@click.option("--server", envvar="BEWA_SERVER", help="Base URL of a running service; omit to work on local state.")
@click.option("--state", envvar="BEWA_HOME", default=".bewa", show_default=True, type=click.Path(path_type=Path),
              help="State directory used in local mode.")
@click.option("--token", envvar="BEWA_TOKEN", help="Bearer token for --server.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="TOML or JSON config.")
@click.pass_context
def main(ctx: click.Context, server: str | None, state: Path, token: str | None, config_path: str | None) -> None:
    """Belief-weighted claim ledger."""
    ctx.obj = Context(server, state, token, config_path)


@main.command()
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
@click.option("--reject-log", type=click.Path(dir_okay=False), help="Write rejected entries and reasons here.")
@click.option("--trusted-key", "trusted_keys", multiple=True, help="Signer public key (hex) to accept.")
@click.pass_obj
def ingest(ctx: Context, corpus: str, reject_log: str | None, trusted_keys: tuple[str, ...]) -> None:
    """Ingest a JSON corpus of claims."""
    try:
        entries = load_corpus(corpus)
    except MalformedCorpus as exc:
        raise click.ClickException(str(exc)) from exc
    out = _call(ctx, "POST", "/claims/batch", json={"entries": entries, "trusted_keys": list(trusted_keys)})
    if reject_log:
        Path(reject_log).write_text(json.dumps(out["rejected"], indent=2) + "\n", encoding="utf-8")
    _emit({"accepted": len(out["accepted"]), "rejected": len(out["rejected"]), "ccs": out["accepted"]})


@main.group()
def score() -> None:
    """Credibility scores."""


@score.command("author")
@click.argument("caid")
@click.pass_obj
def score_author(ctx: Context, caid: str) -> None:
    _emit(_call(ctx, "GET", f"/scores/author/{caid}"))


@score.command("claim")
@click.argument("ccs")
@click.option("--now", help="Evaluation time (RFC 3339 or epoch seconds).")
@click.pass_obj
def score_claim(ctx: Context, ccs: str, now: str | None) -> None:
    _emit(_call(ctx, "GET", f"/scores/claim/{ccs}", params={"now": now} if now else None))


@main.command()
@click.argument("ccs")
@click.option("--evidence", "evidence_file", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSON object or array of evidence units.")
@click.pass_obj
def update(ctx: Context, ccs: str, evidence_file: str) -> None:
    """Apply evidence units to one claim, in order."""
    units = _read_json(evidence_file)
    if isinstance(units, dict):
        units = [units]
    last = None
    with ctx.client() as client:
        for unit in units:
            resp = client.post("/evidence", json={**unit, "ccs": ccs})
            if resp.status_code >= 400:
                raise click.ClickException(f"HTTP {resp.status_code}: {resp.json().get('detail')}")
            last = resp.json()
    _emit(last)


@main.command("decay-tick")
@click.option("--now", help="Tick time (RFC 3339 or epoch seconds); defaults to the clock.")
@click.pass_obj
def decay_tick(ctx: Context, now: str | None) -> None:
    _emit(_call(ctx, "POST", "/decay-tick", json={"now": now}))


@main.command()
@click.option("--max-iters", type=int)
@click.option("--schedule", type=click.Choice(["deterministic", "priority"]))
@click.pass_obj
def propagate(ctx: Context, max_iters: int | None, schedule: str | None) -> None:
    """Run belief propagation to a fixpoint."""
    _emit(_call(ctx, "POST", "/propagate", json={"max_iters": max_iters, "schedule": schedule}))


@main.command()
@click.option("--list", "list_", is_flag=True, help="List detected conflict edges.")
@click.option("--resolve", is_flag=True, help="Resolve violations and quarantine what remains.")
@click.option("--now", help="Resolution time.")
@click.pass_obj
def conflicts(ctx: Context, list_: bool, resolve: bool, now: str | None) -> None:
    if resolve:
        _emit(_call(ctx, "POST", "/conflicts/resolve", json={"now": now}))
    else:
        _emit(_call(ctx, "GET", "/conflicts"))


@main.command()
@click.option("--app", "app_id", default="default", show_default=True)
@click.option("--query", "query_file", type=click.Path(exists=True, dir_okay=False),
              help="JSON with optional embedding and tags.")
@click.option("-k", "k", default=10, show_default=True, type=int)
@click.option("--now")
@click.pass_obj
def rank(ctx: Context, app_id: str, query_file: str | None, k: int, now: str | None) -> None:
    """Rank claims for an application class."""
    query = _read_json(query_file) if query_file else {}
    _emit(_call(ctx, "POST", "/rank", json={"app": app_id, "query": query, "k": k, "now": now}))


@main.group()
def ledger() -> None:
    """Provenance ledger."""


@ledger.command("verify")
@click.pass_obj
def ledger_verify(ctx: Context) -> None:
    out = _call(ctx, "GET", "/ledger/verify")
    _emit(out)
    if not out["ok"]:
        sys.exit(1)


@ledger.command("prove")
@click.argument("ccs")
@click.option("--epoch", required=True, type=int)
@click.pass_obj
def ledger_prove(ctx: Context, ccs: str, epoch: int) -> None:
    _emit(_call(ctx, "GET", f"/ledger/prove/{ccs}", params={"epoch": epoch}))


@ledger.command("export-root")
@click.option("--epoch", required=True, type=int)
@click.pass_obj
def ledger_export_root(ctx: Context, epoch: int) -> None:
    _emit(_call(ctx, "GET", f"/ledger/epochs/{epoch}"))


@ledger.command("seal")
@click.option("--t", "t", help="Commit time for the epoch root.")
@click.pass_obj
def ledger_seal(ctx: Context, t: str | None) -> None:
    """Seal pending entries into a new epoch."""
    _emit(_call(ctx, "POST", "/ledger/seal", json={"t": t}))


@main.command()
@click.option("-f", "filter_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def query(ctx: Context, filter_file: str) -> None:
    """Run a structured query from a JSON request file."""
    _emit(_call(ctx, "POST", "/query", json=_read_json(filter_file)))


@main.command()
@click.argument("ccs")
@click.pass_obj
def audit(ctx: Context, ccs: str) -> None:
    _emit(_call(ctx, "GET", f"/audit/{ccs}"))


@main.command("export-viz")
@click.argument("ccs")
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_obj
def export_viz(ctx: Context, ccs: str, out: str | None) -> None:
    """Export a claim's belief trajectory document."""
    doc = _call(ctx, "GET", f"/claims/{ccs}/trajectory")
    if out:
        Path(out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    else:
        _emit(doc)


@main.command()
@click.option("--config", "sim_config", type=click.Path(exists=True, dir_okay=False),
              help="TOML or JSON simulation settings, top level or under [sim].")
@click.option("--seed", type=int)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False), help="Also write the belief matrix as CSV.")
def simulate(sim_config: str | None, seed: int | None, out: str, csv_out: str | None) -> None:
    """Run a synthetic experiment locally and write its report."""
    from . import sim

    values = read_mapping(sim_config) if sim_config else {}
    values = dict(values.get("sim", values))
    if seed is not None:
        values["seed"] = seed
    try:
        cfg = sim.sim_config_from_mapping(values)
        result = sim.run(cfg)
    except sim.SimError as exc:
        raise click.ClickException(str(exc)) from exc
    rep = sim.report(result)
    Path(out).write_bytes(sim.report_bytes(rep))
    if csv_out:
        Path(csv_out).write_text(sim.matrix_csv(result), encoding="utf-8")
    click.echo(f"wrote {out}: mean_tau_true={rep['mean_tau_true']:.4f} kappa={rep['kappa']} lift={rep['replication_lift']}")


@main.command()
@click.option("--bind", envvar="BEWA_BIND", help="host:port to listen on.")
@click.option("--tokens-file", envvar="BEWA_TOKENS_FILE", type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def serve(ctx: Context, bind: str | None, tokens_file: str | None) -> None:
    """Serve the HTTP API over the local state directory."""
    import uvicorn

    cfg = ctx.config()
    engine = Engine.load(ctx.state, cfg)
    tokens = load_tokens(tokens_file) if tokens_file else {}
    if not tokens:
        token = secrets.token_urlsafe(24)
        tokens = {token: "operator"}
        click.echo(f"no tokens file given; generated bearer token {token}", err=True)
    settings = ServiceSettings.from_env(
        tokens=tokens,
        on_change=lambda e: e.save(ctx.state),
        **({} if os.environ.get("BEWA_RATE_LIMIT") else {"rate_limit": cfg.service.rate_limit, "window": cfg.service.rate_window}),
    )
    host, _, port = (bind or cfg.service.bind).rpartition(":")
    try:
        uvicorn.run(create_app(engine, settings), host=host or "127.0.0.1", port=int(port))
    except OSError as exc:
        raise click.ClickException(f"cannot bind {bind}: {exc}") from exc


if __name__ == "__main__":
    main()
