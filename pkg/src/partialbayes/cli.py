"""Command-line front end.

Every inference subcommand builds a service request and either runs it in process
or, with ``--server URL``, posts it to a running instance of the HTTP service.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import tomli

from . import __version__
from .errors import ConfigurationError, DataError, DomainError, NumericError
from .io import dumps, load_normal, load_poisson, load_shots
from .service import handlers, schemas
from .simulation import THREADS_ENV, fig1_csv, Fig1Row

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

_ROUTES = {
    "normal_known": "/normal/known-tau",
    "normal_unknown": "/normal/unknown-tau",
    "poisson_interval": "/poisson",
    "binom_interval": "/binom-diff",
    "shot_rates": "/shotrates",
    "simulate": "/simulate",
    "fig1": "/fig1",
}
_KIND_EXIT = {"usage": EXIT_USAGE, "data": EXIT_DATA, "numeric": EXIT_NUMERIC}


class RemoteError(Exception):
    def __init__(self, kind: str, detail: str):
        super().__init__(detail)
        self.kind = kind


def _call(args, name: str, request):
    """Run handler ``name`` locally or against ``--server``."""
    if not args.server:
        return getattr(handlers, name)(request)
    import httpx

    response_type = {
        "shot_rates": schemas.ShotRatesResponse,
        "simulate": schemas.SimulationResponse,
        "fig1": schemas.Fig1Response,
    }.get(name, schemas.IntervalResponse)
    r = httpx.post(args.server.rstrip("/") + _ROUTES[name], json=request.model_dump(), timeout=None)
    if r.status_code != 200:
        body = r.json() if r.headers.get("content-type", "").startswith("application/json") else {}
        raise RemoteError(body.get("kind", "usage"), body.get("detail", r.text))
    return response_type.model_validate(r.json())


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _emit_interval(resp: schemas.IntervalResponse, args):
    if getattr(args, "curve", None):
        Path(args.curve).write_text(handlers.curve_csv(resp))
    _emit(dumps(resp.model_dump(exclude={"curve"})), getattr(args, "out", None))


def _need_seed(args):
    if args.seed is None:
        raise ConfigurationError(f"{args.command} is randomized and requires --seed")


# ---------------------------------------------------------------------------
# subcommands


def cmd_normal_known(args):
    req = schemas.NormalKnownRequest(
        observations=load_normal(args.data), tau=args.tau, sigma=args.sigma, alpha=args.alpha,
        method=args.method, include_curve=bool(args.curve),
    )
    _emit_interval(_call(args, "normal_known", req), args)


def cmd_normal_unknown(args):
    req = schemas.NormalUnknownRequest(
        observations=load_normal(args.data), sigma=args.sigma, alpha=args.alpha,
        tempering_gamma=args.tempering_gamma, method=args.method, include_curve=bool(args.curve),
    )
    _emit_interval(_call(args, "normal_unknown", req), args)


def cmd_poisson(args):
    if args.method == "pb":
        _need_seed(args)
    counts, exposures = load_poisson(args.data)
    req = schemas.PoissonRequest(
        counts=counts, exposures=exposures, shape_s=args.shape, alpha=args.alpha, mc_count=args.mc_count,
        lambda_grid_size=args.grid_size, seed=args.seed, index=args.index - 1, method=args.method,
        include_curve=bool(args.curve),
    )
    _emit_interval(_call(args, "poisson_interval", req), args)


def cmd_binom(args):
    _need_seed(args)
    req = schemas.BinomRequest(
        x=args.x, m=args.m, y=args.y, n=args.n, a=args.a, b=args.b, alpha=args.alpha, mc_count=args.mc_count,
        seed=args.seed, include_curve=bool(args.curve),
    )
    _emit_interval(_call(args, "binom_interval", req), args)


def cmd_shotrates(args):
    if args.method == "pb":
        _need_seed(args)
    records = load_shots(args.data)
    req = schemas.ShotRatesRequest(
        records=[schemas.ShotRecordModel(player=r.player, made=r.made, attempts=r.attempts) for r in records],
        method=args.method, alpha=args.alpha, seed=args.seed, mc_count=args.mc_count, shape_s=args.shape,
        players=args.players,
    )
    resp = _call(args, "shot_rates", req)
    _emit(dumps(resp.model_dump(exclude={"results": {"__all__": {"curve"}}})), args.out)


def cmd_simulate(args):
    try:
        config = tomli.loads(Path(args.config).read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse {args.config}: {exc}") from None
    except OSError as exc:
        raise ConfigurationError(f"cannot read {args.config}: {exc}") from None
    if args.seed is not None:
        config["base_seed"] = args.seed
    if "base_seed" not in config:
        raise ConfigurationError("simulate requires --seed or base_seed in the config")
    if args.threads is not None:
        config["threads"] = args.threads
    resp = _call(args, "simulate", schemas.SimulationRequest(config=config))
    _emit(handlers.report_csv(resp), args.out)
    if args.json:
        Path(args.json).write_text(dumps(resp.model_dump()))
    if resp.flagged:
        print("warning: more than 1% of replications failed", file=sys.stderr)


def _parse_n_values(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if ":" in part:
            lo, hi = part.split(":")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out or min(out) < 1:
        raise ConfigurationError("--n needs positive sample sizes, e.g. 1:100 or 2,5,10")
    return out


def cmd_fig1(args):
    try:
        n_values = _parse_n_values(args.n)
    except ValueError:
        raise ConfigurationError(f"cannot parse --n {args.n!r}") from None
    req = schemas.Fig1Request(n_values=n_values, tau=args.tau, sigma=args.sigma, alpha=args.alpha)
    resp = _call(args, "fig1", req)
    _emit(fig1_csv([Fig1Row(**r.model_dump()) for r in resp.rows]), args.out)


def cmd_serve(args):
    import uvicorn

    uvicorn.run("partialbayes.service.app:app", host=args.host, port=args.port)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--server", help="URL of a running service; default runs in process")
    common.add_argument("--out", help="write the result here instead of stdout")

    p = argparse.ArgumentParser(
        prog="partialbayes",
        description="Partial Bayes plausibility intervals for hierarchical models.",
        epilog=f"Set {THREADS_ENV} to change the simulation thread count.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("normal-known", parents=[common], help="normal means, known prior variance")
    s.add_argument("--data", required=True, help="CSV with column x; the first row is the unit of interest")
    s.add_argument("--tau", type=float, required=True)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--method", choices=["pb", "eb"], default="pb")
    s.add_argument("--curve", help="write the plausibility curve as CSV")
    s.set_defaults(func=cmd_normal_known)

    s = sub.add_parser("normal-unknown", parents=[common], help="normal means, unknown prior variance")
    s.add_argument("--data", required=True)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--tempering-gamma", type=float, default=1.0 / 3.0)
    s.add_argument("--method", choices=["pb", "eb"], default="pb")
    s.add_argument("--curve")
    s.set_defaults(func=cmd_normal_unknown)

    s = sub.add_parser("poisson", parents=[common], help="Poisson rates with a Gamma(s) prior of unknown scale")
    s.add_argument("--data", required=True, help="CSV with columns x,t")
    s.add_argument("--shape", type=float, required=True, help="known prior shape s")
    s.add_argument("--index", type=int, default=1, help="1-based record of interest")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--mc-count", type=int, default=5000)
    s.add_argument("--grid-size", type=int, default=201)
    s.add_argument("--method", choices=["pb", "classical", "eb-gamma"], default="pb")
    s.add_argument("--seed", type=int)
    s.add_argument("--curve")
    s.set_defaults(func=cmd_poisson)

    s = sub.add_parser("binom-diff", parents=[common], help="difference of two binomial rates")
    for name in ("x", "m", "y", "n"):
        s.add_argument(f"--{name}", type=int, required=True)
    s.add_argument("--a", type=float, required=True, help="Beta prior parameter a")
    s.add_argument("--b", type=float, required=True, help="Beta prior parameter b")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--mc-count", type=int, default=2000)
    s.add_argument("--seed", type=int)
    s.add_argument("--curve")
    s.set_defaults(func=cmd_binom)

    s = sub.add_parser("simulate", parents=[common], help="coverage study from a TOML config")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, help="overrides base_seed in the config")
    s.add_argument("--threads", type=int)
    s.add_argument("--json", help="also write a JSON summary here")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("shotrates", parents=[common], help="per-player success-rate intervals")
    s.add_argument("--data", required=True, help="CSV with columns player,made,attempts")
    s.add_argument("--method", choices=["classical", "eb", "pb"], required=True)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--seed", type=int)
    s.add_argument("--mc-count", type=int, default=1000)
    s.add_argument("--shape", type=float, default=1.0)
    s.add_argument("--players", nargs="+", help="restrict output to these players")
    s.set_defaults(func=cmd_shotrates)

    s = sub.add_parser("fig1", parents=[common], help="exact EB and PB coverage against n")
    s.add_argument("--n", required=True, help="range lo:hi or comma list")
    s.add_argument("--tau", type=float, default=1.0)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--alpha", type=float, default=0.05)
    s.set_defaults(func=cmd_fig1)

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    from pydantic import ValidationError

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda msg, *a, **k: print(f"warning: {msg}", file=sys.stderr)
            args.func(args)
    except (ConfigurationError, DomainError, ValidationError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"{parser.prog}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, ArithmeticError) as exc:
        print(f"{parser.prog}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except RemoteError as exc:
        print(f"{parser.prog}: {exc.kind} error: {exc}", file=sys.stderr)
        return _KIND_EXIT.get(exc.kind, EXIT_USAGE)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
