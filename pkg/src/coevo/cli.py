"""Command-line interface.

The CLI is a client of the HTTP service: every subcommand except `serve`
builds a request, posts it to the service, and writes the response to
disk. By default the service runs in-process (no socket, no server to
manage — results are identical to a local library call); point
``--server`` or the COEVO_SERVER environment variable at a running
instance to execute remotely instead. File parsing and output layout
stay on the client side either way.

Exit codes: 0 success, 1 input or execution errors, 2 usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional

from .engine import THREADS_ENV_VAR, ConfigError, Regime, RunResult
from .storage import (
    EffectSpecError,
    effect_spec_rows,
    load_config,
    load_effect_spec,
    metrics_to_csv,
    result_from_doc,
    write_compare,
    write_run,
    write_sweep,
)
from .viruses import Mode

SERVER_ENV_VAR = "COEVO_SERVER"


class CliError(Exception):
    def __init__(self, messages: list[str]):
        super().__init__("; ".join(messages))
        self.messages = messages


def parse_seeds(text: str) -> list[int]:
    """``"30"`` means seeds 0..29; ``"4,8,15"`` means exactly those seeds."""
    s = text.strip()
    try:
        if "," in s:
            seeds = [int(p.strip()) for p in s.split(",") if p.strip()]
            if not seeds:
                raise ValueError
            if len(set(seeds)) != len(seeds):
                raise argparse.ArgumentTypeError("duplicate seeds in list")
            return seeds
        count = int(s)
    except argparse.ArgumentTypeError:
        raise
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a replicate count or comma-separated seed list, got {text!r}"
        ) from None
    if count < 1:
        raise argparse.ArgumentTypeError("replicate count must be at least 1")
    return list(range(count))


def parse_regimes(text: str) -> list[str]:
    names = [p.strip() for p in text.split(",") if p.strip()]
    if not names:
        raise argparse.ArgumentTypeError("expected a comma-separated list of regimes")
    options = {r.value for r in Regime}
    unknown = [n for n in names if n not in options]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown regimes {unknown!r}; choose from {sorted(options)}"
        )
    return names


def _add_common_inputs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, metavar="YAML", help="configuration file")
    parser.add_argument(
        "--effects", type=Path, metavar="CSV", help="measure table (name,ci_low,ci_high)"
    )
    parser.add_argument(
        "--server",
        metavar="URL",
        help=f"run against a remote service (default: in-process; env {SERVER_ENV_VAR})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coevo",
        description="Coupled virus/policy evolution simulator.",
        epilog=f"{THREADS_ENV_VAR} caps worker threads for multi-seed commands.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a single replicate")
    _add_common_inputs(run_p)
    run_p.add_argument("--seed", type=int, help="override the configured seed")
    run_p.add_argument("--regime", choices=[r.value for r in Regime])
    run_p.add_argument("--mode", choices=[m.value for m in Mode])
    run_p.add_argument(
        "--out", type=Path, metavar="DIR", help="output directory (default: metrics to stdout)"
    )
    run_p.set_defaults(handler=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run an ensemble of seeds")
    _add_common_inputs(sweep_p)
    sweep_p.add_argument(
        "--seeds", type=parse_seeds, required=True, metavar="N|LIST",
        help="replicate count (seeds 0..N-1) or comma-separated seeds",
    )
    sweep_p.add_argument("--regime", choices=[r.value for r in Regime])
    sweep_p.add_argument("--mode", choices=[m.value for m in Mode])
    sweep_p.add_argument("--out", type=Path, metavar="DIR", required=True)
    sweep_p.set_defaults(handler=cmd_sweep)

    cmp_p = sub.add_parser("compare", help="run matched seeds under each regime")
    _add_common_inputs(cmp_p)
    cmp_p.add_argument(
        "--seeds", type=parse_seeds, required=True, metavar="N|LIST",
        help="replicate count (seeds 0..N-1) or comma-separated seeds",
    )
    cmp_p.add_argument(
        "--regimes", type=parse_regimes, metavar="LIST",
        help="comma-separated subset (default: all three)",
    )
    cmp_p.add_argument("--mode", choices=[m.value for m in Mode])
    cmp_p.add_argument("--out", type=Path, metavar="DIR", required=True)
    cmp_p.set_defaults(handler=cmd_compare)

    val_p = sub.add_parser("validate", help="check inputs without running")
    _add_common_inputs(val_p)
    val_p.set_defaults(handler=cmd_validate)

    serve_p = sub.add_parser("serve", help="start the HTTP service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.set_defaults(handler=cmd_serve)

    return parser


# ---------------------------------------------------------------------------
# Service client
# ---------------------------------------------------------------------------


def make_client(args):
    url = args.server or os.environ.get(SERVER_ENV_VAR)
    if url:
        import httpx

        return httpx.Client(base_url=url, timeout=None)
    import warnings

    with warnings.catch_warnings():
        # starlette nags about its own testclient dependency at import time
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service.app import create_app

    return TestClient(create_app())


def post(client, path: str, payload: dict) -> dict:
    try:
        response = client.post(path, json=payload)
    except Exception as exc:  # connection refused, DNS, ...
        raise CliError([f"service request failed: {exc}"]) from exc
    if response.status_code == 200:
        return response.json()
    try:
        body = response.json()
    except ValueError:
        body = {}
    if isinstance(body, dict) and "errors" in body:
        raise CliError([str(e) for e in body["errors"]])
    detail = body.get("detail") if isinstance(body, dict) else None
    if isinstance(detail, list):  # request-shape errors from the service layer
        raise CliError(
            [f"{'.'.join(str(p) for p in e.get('loc', []))}: {e.get('msg', e)}" for e in detail]
        )
    raise CliError([f"service returned HTTP {response.status_code}: {detail or response.text}"])


# ---------------------------------------------------------------------------
# Request assembly
# ---------------------------------------------------------------------------


def _config_mapping(args) -> dict:
    """Full config mapping: file (or defaults) with flag overrides applied."""
    try:
        if args.config is not None:
            mapping = load_config(args.config).as_mapping()
        else:
            mapping = {}
    except ConfigError as exc:
        raise CliError(exc.errors) from exc
    if getattr(args, "seed", None) is not None:
        mapping["seed"] = args.seed
    if getattr(args, "regime", None) is not None:
        mapping["regime"] = args.regime
    if getattr(args, "mode", None) is not None:
        mapping["mode"] = args.mode
    return mapping


def _effects_rows(args, mapping: dict) -> Optional[list[dict]]:
    if args.effects is None:
        return None
    expected = mapping.get("policy_size")
    try:
        spec = load_effect_spec(args.effects, expected_count=expected)
    except EffectSpecError as exc:
        raise CliError([str(exc)]) from exc
    return effect_spec_rows(spec)


def _describe(result: RunResult) -> str:
    final = result.final_row()
    parts = [
        f"seed {result.seed}",
        f"status {result.status.label()}",
        f"periods {len(result.rows)}",
        f"final population {final.total_viruses}",
        f"strains {final.n_strains}",
    ]
    if final.mean_effective_r is not None:
        parts.append(f"effective rate {final.mean_effective_r:.4g}")
    return ", ".join(parts)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    mapping = _config_mapping(args)
    payload = {"config": mapping, "effects": _effects_rows(args, mapping)}
    with make_client(args) as client:
        doc = post(client, "/run", payload)
    result = result_from_doc(doc)
    if args.out is None:
        sys.stdout.write(metrics_to_csv(result.rows))
    else:
        paths = write_run(result, args.out)
        print(_describe(result))
        for path in paths:
            print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    mapping = _config_mapping(args)
    payload = {
        "config": mapping,
        "effects": _effects_rows(args, mapping),
        "seeds": args.seeds,
    }
    with make_client(args) as client:
        body = post(client, "/sweep", payload)
    results = [result_from_doc(doc) for doc in body["runs"]]
    write_sweep(results, args.out)
    n_extinct = sum(1 for r in results if r.status.kind == "extinct")
    n_overflow = sum(1 for r in results if r.status.kind == "overflow")
    print(
        f"{len(results)} runs written to {args.out} "
        f"({n_extinct} extinct, {n_overflow} overflowed)"
    )
    return 0


def cmd_compare(args) -> int:
    mapping = _config_mapping(args)
    payload = {
        "config": mapping,
        "effects": _effects_rows(args, mapping),
        "seeds": args.seeds,
        "regimes": args.regimes,
    }
    with make_client(args) as client:
        body = post(client, "/compare", payload)
    by_regime = {
        Regime(name): [result_from_doc(doc) for doc in sweep["runs"]]
        for name, sweep in body["regimes"].items()
    }
    write_compare(by_regime, body["seeds"], args.out)
    names = ", ".join(r.value for r in by_regime)
    print(f"{len(args.seeds)} seeds x [{names}] written to {args.out}")
    return 0


def cmd_validate(args) -> int:
    mapping = _config_mapping(args)
    payload = {"config": mapping, "effects": _effects_rows(args, mapping)}
    with make_client(args) as client:
        body = post(client, "/validate", payload)
    if body["valid"]:
        config = body["config"]
        print(f"ok: regime {config['regime']}, mode {config['mode']}, "
              f"{body['n_measures']} measures, tmax {config['tmax']}")
        return 0
    for message in body["errors"]:
        print(f"error: {message}", file=sys.stderr)
    return 1


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except CliError as exc:
        for message in exc.messages:
            print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
