"""Command-line client for the affcalc service.

Every subcommand assembles a JSON request, sends it to the service,
and renders the response as a flat ``key=value`` report (plus CSV
sidecars next to ``--out``).  By default the FastAPI app runs in
process, so no server is needed; ``--server URL`` targets a remote
instance instead.

Exit codes: 0 success, 2 validation error (HTTP 422 or local input
problems), 3 numeric failure (HTTP 409: diverging derivatives, zero
marginals, degenerate variance, ...).  Identical configuration and
seed produce byte-identical reports.

A JSON config file (``--config``) may hold any option, globally or
under a per-command section; command-line flags win over file values.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Any, Optional

from .errors import AffcalcError, InputError, NumericError
from .measures import mix, parse_measure_csv, parse_samples, empirical, make_discrete

COMMANDS = (
    "eval",
    "deriv",
    "influence",
    "probe",
    "envelope",
    "robust-range",
    "posterior-loss",
    "clt",
    "remainder",
)


# ---------------------------------------------------------------------------
# client


class ServiceClient:
    """POSTs request bodies either in process or to a remote server."""

    def __init__(self, server: Optional[str] = None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=300.0)
        else:
            import warnings

            with warnings.catch_warnings():
                # starlette warns about its httpx transport shim; harmless here
                warnings.filterwarnings("ignore", message=".*httpx2.*")
                from fastapi.testclient import TestClient

            from .api.app import create_app

            self._client = TestClient(create_app(), raise_server_exceptions=False)

    def post(self, path: str, payload: dict) -> tuple[int, Any]:
        resp = self._client.post(path, json=payload)
        try:
            body = resp.json()
        except ValueError:
            body = {"error": "BadResponse", "detail": resp.text[:200]}
        return resp.status_code, body


# ---------------------------------------------------------------------------
# argument parsing helpers


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except ValueError:
        return text


def parse_measure_arg(text: str) -> dict:
    """Measure flag: inline ``loc:weight,...`` or a CSV path.

    A CSV with a ``location,weight`` header is read as a measure; any
    other file is read as one sample per line and turned into the
    empirical distribution.
    """
    text = text.strip()
    if ":" in text:
        atoms = []
        for part in text.split(","):
            try:
                loc, w = part.split(":")
                atoms.append((float(loc), float(w)))
            except ValueError:
                raise InputError(f"bad inline measure atom {part!r}; expected loc:weight") from None
        m = make_discrete(atoms)
    else:
        try:
            with open(text, "r", encoding="utf-8") as fh:
                content = fh.read()
        except OSError as exc:
            raise InputError(f"cannot read measure file {text!r}: {exc}") from exc
        first = content.lstrip().splitlines()[0] if content.strip() else ""
        if first.replace(" ", "").startswith("location,weight"):
            m = parse_measure_csv(content)
        else:
            m = empirical(parse_samples(content))
    return {"atoms": [[float(x), float(w)] for x, w in zip(m.locations, m.weights)], "kind": m.kind}


def parse_measure_list(text: str) -> list[dict]:
    return [parse_measure_arg(part) for part in text.split(";") if part.strip()]


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise InputError(f"bad numeric list {text!r}") from exc


def parse_density_arg(text: str) -> dict:
    """Density flag: ``b0,b1,...|d0,d1,...`` (breakpoints | densities)."""
    try:
        bp, dens = text.split("|")
    except ValueError:
        raise InputError(f"bad density {text!r}; expected 'breakpoints|densities'") from None
    return {"breakpoints": parse_float_list(bp), "densities": parse_float_list(dens)}


def parse_kernel_table_csv(path: str) -> tuple[list[float], list[list[float]]]:
    """Square CSV: header ``psi,<g1>,<g2>,...``, then one row per grid point."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise InputError(f"cannot read kernel table {path!r}: {exc}") from exc
    if not rows or rows[0][0].strip() != "psi":
        raise InputError("kernel table CSV must start with a 'psi,<grid...>' header")
    grid = [float(c) for c in rows[0][1:]]
    values = []
    for row in rows[1:]:
        values.append([float(c) for c in row[1:]])
    return grid, values


def _set_nested(target: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = target
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise InputError(f"parameter path {dotted!r} collides with a scalar")
    node[keys[-1]] = value


def functional_payload(args, section: dict) -> dict:
    """Merge the config section and --functional/--fparam flags."""
    spec = dict(section.get("functional", {})) if isinstance(section.get("functional"), dict) else {}
    if getattr(args, "functional", None):
        spec["variant"] = args.functional
    for kv in getattr(args, "fparam", None) or []:
        if "=" not in kv:
            raise InputError(f"bad --fparam {kv!r}; expected key=value")
        key, _, raw = kv.partition("=")
        _set_nested(spec, key.strip(), _parse_scalar(raw.strip()))
    if getattr(args, "negate", False):
        spec["scale"] = -1.0 * float(spec.get("scale", 1.0))
    if "variant" not in spec:
        raise InputError("no functional given; use --functional or a config file")
    # convenience encodings for nested parameters
    if isinstance(spec.get("f0"), str):
        spec["f0"] = parse_measure_arg(spec["f0"])
    if isinstance(spec.get("rho"), str):
        spec["rho"] = parse_density_arg(spec["rho"])
    kernel = spec.get("kernel")
    if isinstance(kernel, str):
        spec["kernel"] = kernel = {"variant": kernel}
    if isinstance(kernel, dict) and isinstance(kernel.get("table"), str):
        grid, values = parse_kernel_table_csv(kernel.pop("table"))
        kernel.update({"variant": "table", "grid": grid, "values": values})
    return spec


# ---------------------------------------------------------------------------
# report rendering


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_report(items: list[tuple[str, Any]]) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in items)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(c) for c in row])
    return buf.getvalue()


def emit(report: str, out: Optional[str], sidecars: dict[str, str]) -> None:
    sys.stdout.write(report)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(report)
        for suffix, text in sidecars.items():
            with open(out + suffix, "w", encoding="utf-8") as fh:
                fh.write(text)


def _measure_inline(model: dict) -> str:
    return ",".join(f"{x:g}:{w}" for x, w in model["atoms"])


# ---------------------------------------------------------------------------
# per-command request builders and report renderers


def _tol(args, default: float) -> float:
    return default if args.tol is None else float(args.tol)


def _require(args, *names) -> None:
    missing = [n for n in names if getattr(args, n.replace("-", "_"), None) in (None, "")]
    if missing:
        raise InputError(f"missing required option(s): {', '.join('--' + n for n in missing)}")


def _build_eval(args, section):
    _require(args, "measure")
    payload = {"functional": functional_payload(args, section), "measure": parse_measure_arg(args.measure)}
    if args.measure2:
        payload["second_measure"] = parse_measure_arg(args.measure2)
    return "/eval", payload


def _render_eval(body, _args):
    return [("command", "eval"), ("value", body["value"])], {}


def _build_deriv(args, section):
    _require(args, "at", "dir")
    payload = {
        "functional": functional_payload(args, section),
        "at": parse_measure_arg(args.at),
        "direction": parse_measure_arg(args.dir),
        "ladder": args.ladder if args.ladder is not None else 12,
        "t_min": args.t_min if args.t_min is not None else 2.0**-15,
        "tol": _tol(args, 1e-7),
    }
    if args.at2:
        payload["at_second"] = parse_measure_arg(args.at2)
    if args.dir2:
        payload["direction_second"] = parse_measure_arg(args.dir2)
    return "/deriv", payload


def _render_deriv(body, _args):
    items = [
        ("command", "deriv"),
        ("analytic", body["analytic"]),
        ("estimate", body["estimate"]),
        ("abs_error", body["abs_error"]),
        ("verdict", body["verdict"]),
        ("extrapolated_error", body["extrapolated_error"]),
        ("agree", body["agree"]),
    ]
    ladder = _csv_text(["t", "quotient"], [list(r) for r in body["step_ladder"]])
    return items, {".ladder.csv": ladder}


def _build_influence(args, section):
    _require(args, "measure")
    payload = {
        "functional": functional_payload(args, section),
        "measure": parse_measure_arg(args.measure),
        "grid": parse_float_list(args.grid) if args.grid else [],
    }
    if args.measure2:
        payload["second_measure"] = parse_measure_arg(args.measure2)
    return "/influence", payload


def _render_influence(body, _args):
    items = [("command", "influence"), ("tables", len(body["tables"]))]
    sidecars = {}
    for table in body["tables"]:
        slot = table["slot"]
        items.append((f"{slot}_points", len(table["grid"])))
        rows = [[g, v] for g, v in zip(table["grid"], table["values"])]
        sidecars[f".{slot}.csv"] = _csv_text(["point", "value"], rows)
        for g, v in zip(table["grid"], table["values"]):
            items.append((f"{slot}[{_fmt(float(g))}]", v))
    return items, sidecars


def _build_probe(args, section):
    _require(args, "property")
    pairs = []
    for spec in args.pair or []:
        parts = spec.split("|")
        if len(parts) != 2:
            raise InputError(f"bad --pair {spec!r}; expected 'measure|measure'")
        pairs.append([parse_measure_arg(parts[0]), parse_measure_arg(parts[1])])
    if args.random:
        if not args.support:
            raise InputError("--random needs --support grid points")
        import numpy as np

        grid = parse_float_list(args.support)
        rng = np.random.default_rng(args.seed)
        for _ in range(args.random):
            pair = []
            for _ in range(2):
                w = rng.dirichlet(np.ones(len(grid)))
                pair.append({"atoms": [[g, float(wi)] for g, wi in zip(grid, w)], "kind": "probability"})
            pairs.append(pair)
    if not pairs:
        raise InputError("probe needs --pair entries or --random N with --support")
    payload = {
        "functional": functional_payload(args, section),
        "property": args.property,
        "pairs": pairs,
        "tol": _tol(args, 1e-10),
    }
    return "/probe", payload


def _render_probe(body, _args):
    items = [
        ("command", "probe"),
        ("property", body["property"]),
        ("holds", body["holds"]),
    ]
    if body.get("witness"):
        w = body["witness"]
        items.append(("witness_x", _measure_inline(w["x"])))
        items.append(("witness_y", _measure_inline(w["y"])))
        for i, v in enumerate(w["values"]):
            items.append((f"witness_value_{i}", v))
    return items, {}


def _build_envelope(args, section):
    _require(args, "fixture")
    payload: dict[str, Any] = {"fixture": args.fixture, "agree_tol": _tol(args, 1e-4)}
    if args.x is not None:
        payload["x"] = args.x
    if args.y is not None:
        payload["y"] = args.y
    if args.mu:
        payload["mu"] = parse_measure_arg(args.mu)
    if args.nu:
        payload["nu"] = parse_measure_arg(args.nu)
    return "/envelope", payload


def _render_envelope(body, _args):
    items = [
        ("command", "envelope"),
        ("value", body["value"]),
        ("formula", body["formula"]),
        ("fd", body["fd"]),
        ("agree", body["agree"]),
        ("fd_verdict", body["fd_verdict"]),
    ]
    if body.get("solution_interval"):
        lo, hi = body["solution_interval"]
        items.append(("solution_lo", lo))
        items.append(("solution_hi", hi))
    else:
        items.append(("solutions", ",".join(_fmt(s) for s in body["solutions"])))
    items.append(("note", body["note"]))
    return items, {}


def _build_range(args, section):
    _require(args, "generators", "obs")
    if not args.likelihood:
        raise InputError("robust-range needs --likelihood CSV")
    from .bayes import LikelihoodTable

    table = LikelihoodTable.from_csv(args.likelihood)
    payload = {
        "functional": functional_payload(args, section),
        "generators": parse_measure_list(args.generators),
        "likelihood": {
            "parameters": table.parameters.tolist(),
            "observations": list(table.observations),
            "probabilities": table.probabilities.tolist(),
        },
        "observation": args.obs,
        "max_iters": args.max_iters if args.max_iters is not None else 500,
    }
    return "/robust-range", payload


def _render_range(body, _args):
    items = [
        ("command", "robust-range"),
        ("lo", body["lo"]),
        ("hi", body["hi"]),
        ("lo_cert", body["lo_cert"]),
        ("hi_cert", body["hi_cert"]),
        ("iterations", body["iterations"]),
        ("converged", body["converged"]),
        ("lo_prior", _measure_inline(body["lo_prior"])),
        ("hi_prior", _measure_inline(body["hi_prior"])),
    ]
    return items, {}


def _build_posterior_loss(args, section):
    _require(args, "prior")
    payload = {"prior": parse_measure_arg(args.prior), "loss": "absolute"}
    if args.nu:
        payload["direction"] = parse_measure_arg(args.nu)
    return "/posterior-loss", payload


def _render_posterior_loss(body, _args):
    items = [("command", "posterior-loss"), ("loss", body["loss"])]
    if body.get("derivative") is not None:
        items.append(("derivative", body["derivative"]))
    return items, {}


def _build_clt(args, section):
    _require(args, "measure", "n", "reps")
    payload = {
        "functional": functional_payload(args, section),
        "measure": parse_measure_arg(args.measure),
        "n": args.n,
        "replications": args.reps,
        "seed": args.seed,
    }
    return "/clt", payload


def _render_clt(body, _args):
    items = [
        ("command", "clt"),
        ("n", body["n"]),
        ("replications", body["replications"]),
        ("seed", body["seed"]),
        ("sigma2_analytic", body["sigma2_analytic"]),
        ("stat_mean", body["stat_mean"]),
        ("stat_variance", body["stat_variance"]),
        ("ks_distance", body["ks_distance"]),
    ]
    header = ["n", "replications", "seed", "sigma2_analytic", "stat_mean", "stat_variance", "ks_distance"]
    row = [body[k] for k in header]
    return items, {".summary.csv": _csv_text(header, [row])}


def _build_remainder(args, section):
    _require(args, "base", "metric")
    base = parse_measure_arg(args.base)
    path: list[dict] = []
    if args.path:
        path.extend(parse_measure_list(args.path))
    if args.dirac_path:
        for x in parse_float_list(args.dirac_path):
            path.append({"atoms": [[x, 1.0]], "kind": "probability"})
    if args.toward:
        toward = parse_measure_arg(args.toward)
        b = make_discrete([(x, w) for x, w in base["atoms"]])
        t_meas = make_discrete([(x, w) for x, w in toward["atoms"]])
        t = args.t0 if args.t0 is not None else 0.5
        for _ in range(args.halvings if args.halvings is not None else 8):
            mixed = mix(b, t_meas, t)
            path.append({"atoms": [[float(x), float(w)] for x, w in zip(mixed.locations, mixed.weights)], "kind": "probability"})
            t *= 0.5
    if not path:
        raise InputError("remainder needs --path, --dirac-path, or --toward with --halvings")
    payload = {
        "functional": functional_payload(args, section),
        "base": base,
        "metric": args.metric,
        "path": path,
    }
    return "/remainder", payload


def _render_remainder(body, _args):
    items = [
        ("command", "remainder"),
        ("metric", body["metric"]),
        ("points", len(body["samples"])),
        ("fitted_slope", body["fitted_slope"]),
        ("limit_ratio", body["limit_ratio"]),
    ]
    rows = [list(r) for r in body["samples"]]
    return items, {".samples.csv": _csv_text(["distance", "remainder"], rows)}


_BUILDERS = {
    "eval": (_build_eval, _render_eval),
    "deriv": (_build_deriv, _render_deriv),
    "influence": (_build_influence, _render_influence),
    "probe": (_build_probe, _render_probe),
    "envelope": (_build_envelope, _render_envelope),
    "robust-range": (_build_range, _render_range),
    "posterior-loss": (_build_posterior_loss, _render_posterior_loss),
    "clt": (_build_clt, _render_clt),
    "remainder": (_build_remainder, _render_remainder),
}


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="affcalc",
        description="Directional calculus for functionals of probability distributions.",
        epilog="Measures: inline 'loc:weight,loc:weight' or a CSV path "
        "(header 'location,weight' for a measure, plain lines for samples). "
        "Values starting with '-' need the --flag=value spelling.",
    )
    p.add_argument("--server", default=None, help="remote service URL (default: run the app in process)")
    p.add_argument("--out", default=None, help="write the report here (plus CSV sidecars)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed for seeded commands (default 0)")
    p.add_argument(
        "--tol",
        type=float,
        default=None,
        help="tolerance knob of the command (defaults: deriv 1e-7, probe 1e-10, envelope agreement 1e-4)",
    )
    p.add_argument("--config", default=None, help="JSON config file; flags win over file values")
    sub = p.add_subparsers(dest="command", required=True)

    def add_functional(sp):
        sp.add_argument("--functional", default=None, help="variant name (cdf_at, moment, quadratic, ...)")
        sp.add_argument(
            "--fparam",
            action="append",
            default=None,
            metavar="KEY=VALUE",
            help="functional parameter, dot-nested (e.g. alpha=2, kernel.variant=min, w_plus.gamma=2)",
        )
        sp.add_argument("--negate", action="store_true", help="flip the functional's sign")

    sp = sub.add_parser("eval", help="evaluate a functional at a measure")
    add_functional(sp)
    sp.add_argument("--measure", default=None)
    sp.add_argument("--measure2", default=None, help="second slot for the biaffine rank form")

    sp = sub.add_parser("deriv", help="analytic vs finite-difference mixture derivative")
    add_functional(sp)
    sp.add_argument("--at", default=None)
    sp.add_argument("--dir", default=None)
    sp.add_argument("--at2", default=None)
    sp.add_argument("--dir2", default=None)
    sp.add_argument("--t-min", dest="t_min", type=float, default=None, help="smallest ladder step (default 2^-15)")
    sp.add_argument("--ladder", type=int, default=None, help="ladder rungs (default 12)")

    sp = sub.add_parser("influence", help="normalized influence table on a grid")
    add_functional(sp)
    sp.add_argument("--measure", default=None)
    sp.add_argument("--measure2", default=None)
    sp.add_argument("--grid", default=None, help="comma list of grid points")

    sp = sub.add_parser("probe", help="convexity-shape probe over measure pairs")
    add_functional(sp)
    sp.add_argument("--property", default=None, choices=["convex", "quasiconvex", "pseudoconvex", "monotone_derivative"])
    sp.add_argument("--pair", action="append", default=None, metavar="M|M")
    sp.add_argument("--random", type=int, default=0, help="add N seeded random pairs")
    sp.add_argument("--support", default=None, help="grid for --random pairs")

    sp = sub.add_parser("envelope", help="value function and envelope derivative of a fixture")
    sp.add_argument("--fixture", default=None, choices=["counterexample_danskin", "absolute_loss"])
    sp.add_argument("--x", type=float, default=None)
    sp.add_argument("--y", type=float, default=None)
    sp.add_argument("--mu", default=None)
    sp.add_argument("--nu", default=None)

    sp = sub.add_parser("robust-range", help="posterior functional range over a prior class")
    add_functional(sp)
    sp.add_argument("--generators", default=None, help="semicolon list of measures")
    sp.add_argument("--likelihood", default=None, help="CSV with header theta,<labels...>")
    sp.add_argument("--obs", default=None)
    sp.add_argument("--max-iters", dest="max_iters", type=int, default=None, help="conditional-gradient budget (default 500)")

    sp = sub.add_parser("posterior-loss", help="expected absolute loss of the Bayes estimator")
    sp.add_argument("--prior", default=None)
    sp.add_argument("--nu", default=None, help="direction for the loss derivative")

    sp = sub.add_parser("clt", help="Monte Carlo normality check of the plug-in statistic")
    add_functional(sp)
    sp.add_argument("--measure", default=None)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--reps", type=int, default=None)

    sp = sub.add_parser("remainder", help="first-order remainder probe along a path")
    add_functional(sp)
    sp.add_argument("--base", default=None)
    sp.add_argument("--metric", default=None, choices=["kolmogorov", "total_variation", "levy_prokhorov"])
    sp.add_argument("--path", default=None, help="semicolon list of measures")
    sp.add_argument("--dirac-path", dest="dirac_path", default=None, help="comma list of point-mass locations")
    sp.add_argument("--toward", default=None, help="mix the base toward this measure")
    sp.add_argument("--halvings", type=int, default=None, help="path points toward the target (default 8)")
    sp.add_argument("--t0", type=float, default=None, help="largest mixing weight of the path (default 0.5)")

    return p


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    unknown = [k for k in cfg if k not in COMMANDS and k not in ("server", "out", "seed", "tol")]
    if unknown:
        raise InputError(f"unknown config keys {unknown}; allowed: commands and server/out/seed/tol")
    return cfg


def _merge_config(args: argparse.Namespace, cfg: dict) -> dict:
    """Fill unset flags from the config; returns the command section."""
    section = cfg.get(args.command, {})
    if not isinstance(section, dict):
        raise InputError(f"config section {args.command!r} must be an object")
    for key in ("server", "out", "seed", "tol"):
        if getattr(args, key) is None:
            if key in section:
                setattr(args, key, section[key])
            elif key in cfg:
                setattr(args, key, cfg[key])
    for key, value in section.items():
        if key in ("functional", "server", "out", "seed", "tol"):
            continue
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise InputError(f"unknown key {key!r} in config section {args.command!r}")
        if getattr(args, attr) in (None, 0, False):
            setattr(args, attr, value)
    if args.seed is None:
        args.seed = 0
    return section


def dispatch(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    section = _merge_config(args, cfg)
    build, render = _BUILDERS[args.command]
    path, payload = build(args, section)
    client = ServiceClient(args.server)
    status, body = client.post(path, payload)
    if status == 200:
        items, sidecars = render(body, args)
        emit(render_report(items), args.out, sidecars)
        return 0
    name = body.get("error", "Error") if isinstance(body, dict) else "Error"
    detail = body.get("detail", body) if isinstance(body, dict) else body
    print(f"{name}: {detail}", file=sys.stderr)
    if status == 422:
        return 2
    return 3


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return dispatch(args)
    except InputError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except AffcalcError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
