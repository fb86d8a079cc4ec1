"""Thin-client command line.

Every subcommand talks to the HTTP service: in-process by default (no server
needed), or over the network when --server is given. File I/O stays on the
client side; the service only computes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from .config import load_mission_config, load_sim_config, load_world_config
from .errors import ConfigError
from .sim import EVENTS_NAME, SUMMARY_NAME, TRACE_NAME, WORLD_NAME

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VIOLATIONS = 1
EXIT_HALTED = 3


class ServiceClient:
    """POSTs against a remote server, or the in-process ASGI app by default."""

    def __init__(self, server: str | None):
        self.server = server

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc) -> None:
        return None

    def post(self, path: str, payload: dict) -> httpx.Response:
        if self.server:
            with httpx.Client(base_url=self.server, timeout=600.0) as client:
                return client.post(path, json=payload)
        import asyncio

        from .service import app

        async def call() -> httpx.Response:
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://traybot.local", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        return asyncio.run(call())


def _client(server: str | None) -> ServiceClient:
    return ServiceClient(server)


def _post(client: ServiceClient, path: str, payload: dict) -> dict:
    response = client.post(path, payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except Exception:
            detail = response.text
        raise ConfigError(f"{path} failed ({response.status_code}): {detail}")
    return response.json()


def _parse_fault(text: str) -> int:
    # accepted form: transition-failure:LAYER
    kind, _, layer = text.partition(":")
    if kind != "transition-failure" or not layer.lstrip("-").isdigit():
        raise ConfigError(f"unknown fault spec {text!r}; expected transition-failure:LAYER")
    return int(layer)


def cmd_run(args: argparse.Namespace) -> int:
    world = load_world_config(args.world)
    mission = load_mission_config(args.mission)
    sim = load_sim_config(args.sim)
    if args.seed is not None:
        sim = sim.model_copy(update={"seed": args.seed})
    if args.fault:
        layers = list(sim.faults.transition_failure_layers)
        for fault in args.fault:
            layers.append(_parse_fault(fault))
        sim = sim.model_copy(
            update={"faults": sim.faults.model_copy(update={"transition_failure_layers": layers})}
        )
    with _client(args.server) as client:
        payload = {
            "world": world.model_dump(),
            "mission": mission.model_dump(),
            "sim": sim.model_dump(),
        }
        data = _post(client, "/run", payload)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / TRACE_NAME).write_text(data["trace_csv"])
    (out / EVENTS_NAME).write_text(data["events_jsonl"])
    (out / WORLD_NAME).write_text(json.dumps(world.model_dump(), indent=1, sort_keys=True))
    summary = {
        "exit_status": data["exit_status"],
        "final_node": data["final_node"],
        "ticks": data["ticks"],
        "layer_start": data["layer_start"],
        "layer_end": data["layer_end"],
    }
    (out / SUMMARY_NAME).write_text(json.dumps(summary, indent=1, sort_keys=True))
    print(f"exit status: {data['exit_status']} (final node {data['final_node']}, "
          f"{data['ticks']} ticks); outputs in {out}")
    return EXIT_OK if data["exit_status"] == "done" else EXIT_HALTED


def cmd_check_invariants(args: argparse.Namespace) -> int:
    trace_dir = Path(args.trace)
    try:
        trace_csv = (trace_dir / TRACE_NAME).read_text()
        events_jsonl = (trace_dir / EVENTS_NAME).read_text()
        world = json.loads((trace_dir / WORLD_NAME).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"trace directory incomplete: {exc}") from exc
    with _client(args.server) as client:
        data = _post(client, "/check-invariants", {
            "trace_csv": trace_csv, "events_jsonl": events_jsonl, "world": world,
        })
    if data["ok"]:
        print("all invariants hold")
        return EXIT_OK
    for violation in data["violations"]:
        print(f"VIOLATION: {violation}")
    return EXIT_VIOLATIONS


def cmd_plan_contacts(args: argparse.Namespace) -> int:
    with open(args.problem) as f:
        problem = json.load(f)
    with _client(args.server) as client:
        data = _post(client, "/plan-contacts", problem)
    text = json.dumps(data, indent=1, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text)
        print(f"plan written to {args.out}")
    else:
        print(text)
    return EXIT_OK


def cmd_solve_qp(args: argparse.Namespace) -> int:
    with open(args.problem) as f:
        problem = json.load(f)
    with _client(args.server) as client:
        data = _post(client, "/solve-qp", problem)
    print(json.dumps(data, indent=1, sort_keys=True))
    return EXIT_OK if data["status"] == "optimal" else EXIT_ERROR


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("traybot.service:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="traybot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a mission and write trace outputs")
    run_p.add_argument("--world", required=True)
    run_p.add_argument("--mission", required=True)
    run_p.add_argument("--sim", required=True)
    run_p.add_argument("--out", required=True)
    run_p.add_argument("--seed", type=int, default=None, help="override the sim seed")
    run_p.add_argument("--fault", action="append", default=[],
                       help="inject a fault, e.g. transition-failure:2")
    run_p.add_argument("--server", default=None, help="remote service URL")
    run_p.set_defaults(func=cmd_run)

    chk = sub.add_parser("check-invariants", help="validate a written trace directory")
    chk.add_argument("--trace", required=True)
    chk.add_argument("--server", default=None)
    chk.set_defaults(func=cmd_check_invariants)

    pc = sub.add_parser("plan-contacts", help="solve a contact-sequence problem file")
    pc.add_argument("--problem", required=True)
    pc.add_argument("--out", default=None)
    pc.add_argument("--server", default=None)
    pc.set_defaults(func=cmd_plan_contacts)

    qp = sub.add_parser("solve-qp", help="solve a QP problem file (debug)")
    qp.add_argument("--problem", required=True)
    qp.add_argument("--server", default=None)
    qp.set_defaults(func=cmd_solve_qp)

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
