"""Command-line entry point.

Subcommands: ``run``, ``replicate``, ``oracle``, ``verify``, ``compare``.
Experiments are described by a JSON file (``--config``); individual flags
override its fields.

Exit codes: 0 success, 1 a test failed, 2 configuration error, 3 an AMS run
exceeded its iteration cap.
"""

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import acceptance, core, oracle, stats
from .core import AmsConfig
from .errors import AmsError, ConfigError, RunawayError
from .models import MODEL_REGISTRY, make_model
from .provenance import build_id, config_digest, fmt

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNAWAY = 0, 1, 2, 3


@dataclass(frozen=True)
class ExperimentConfig:
    model_key: str = "exponential"
    model_params: tuple = ()
    n: int = 100
    k: int = 1
    x: float = 0.0
    a: float = 1.0
    m_reps: int = 1000
    seed: int = 0
    max_iterations: int | None = None
    output_format: str = "json"
    output_path: str | None = None
    cost: dict = field(default_factory=dict)

    def validate(self):
        if self.model_key not in MODEL_REGISTRY:
            known = ", ".join(sorted(MODEL_REGISTRY))
            raise ConfigError(f"unknown model key {self.model_key!r} (known: {known})")
        make_model(self.model_key, self.model_params)
        self.ams_config()
        if self.m_reps < 1:
            raise ConfigError(f"m_reps must be >= 1, got {self.m_reps}")
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"output format must be csv or json, got {self.output_format!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        return self

    def ams_config(self):
        return AmsConfig(self.n, self.k, self.x, self.a, self.max_iterations)

    @property
    def model(self):
        return make_model(self.model_key, self.model_params)

    @property
    def digest(self):
        return config_digest(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        kwargs = {}
        model = data.pop("model", None)
        if model is not None:
            if not isinstance(model, dict) or "key" not in model:
                raise ConfigError("model must be an object with a 'key' field")
            kwargs["model_key"] = model["key"]
            kwargs["model_params"] = tuple(float(p) for p in model.get("params", ()))
        output = data.pop("output", None)
        if output is not None:
            kwargs["output_format"] = output.get("format", "json")
            kwargs["output_path"] = output.get("path")
        if "cost" in data:
            kwargs["cost"] = dict(data.pop("cost"))
        for key in ("n", "k", "m_reps", "seed", "max_iterations"):
            if key in data:
                value = data.pop(key)
                if value is not None and (not isinstance(value, int) or isinstance(value, bool)):
                    raise ConfigError(f"{key} must be an integer, got {value!r}")
                kwargs[key] = value
        for key in ("x", "a"):
            if key in data:
                kwargs[key] = float(data.pop(key))
        if data:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(data))}")
        return cls(**kwargs)


def _parse_params(text):
    if text is None:
        return None
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"--params must be comma-separated numbers, got {text!r}") from None


def load_config(args):
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = ExperimentConfig.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    overrides = {}
    for name in ("n", "k", "x", "a", "m_reps", "seed", "max_iterations"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if getattr(args, "model", None) is not None:
        overrides["model_key"] = args.model
    params = _parse_params(getattr(args, "params", None))
    if params is not None:
        overrides["model_params"] = params
    if getattr(args, "format", None) is not None:
        overrides["output_format"] = args.format
    if getattr(args, "output", None) is not None:
        overrides["output_path"] = args.output
    return replace(cfg, **overrides).validate()


def _provenance(cfg):
    return {"seed": cfg.seed, "config_digest": cfg.digest, "build_id": build_id()}


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def cmd_run(args):
    cfg = load_config(args)
    result = core.run_ams(cfg.model, cfg.ams_config(), cfg.seed, args.rep)
    out = {
        "J": result.j_count,
        "C": result.corrector,
        "estimate": result.estimate,
        "samples_drawn": result.samples_drawn,
        "level_trace": result.level_trace.tolist(),
        "rep": args.rep,
        **_provenance(cfg),
    }
    _emit(json.dumps(out) + "\n", cfg.output_path)
    return EXIT_OK


def cmd_replicate(args):
    cfg = load_config(args)
    if cfg.m_reps < 2:
        raise ConfigError("replicate needs m_reps >= 2")
    plan = stats.ReplicationPlan(
        cfg.ams_config(), cfg.model_key, cfg.model_params, cfg.m_reps, cfg.seed, keep_runs=bool(args.runs_csv)
    )
    summary = stats.run_replications(plan)
    summary = replace(summary, config_digest=cfg.digest)
    if args.runs_csv:
        stats.write_runs_csv(summary, args.runs_csv)
    if cfg.output_format == "csv":
        text = _csv_text(summary.CSV_COLUMNS, [summary.csv_row()])
    else:
        record = {
            key: (val.tolist() if isinstance(val, np.ndarray) else val)
            for key, val in asdict(summary).items()
            if key not in ("runs_J", "runs_count")
        }
        record["build_id"] = build_id()
        text = json.dumps(record) + "\n"
    _emit(text, cfg.output_path)
    return EXIT_OK


def cmd_oracle(args):
    cfg = load_config(args)
    n, k, a = cfg.n, cfg.k, cfg.a
    prov = _provenance(cfg)
    if args.method == "spectral":
        if args.kind == "p":
            raise ConfigError("the spectral route covers kinds v and T only")
        sol = (oracle.spectral_v if args.kind == "v" else oracle.spectral_T)(n, k, a)
        xs = np.linspace(0.0, a, args.points)
        values = sol(xs)
        errors = np.zeros_like(xs)
        dump = {
            "kind": sol.kind, "n": n, "k": k, "a": a, "slope": sol.slope,
            "roots": [[r.real, r.imag] for r in sol.roots],
            "coeffs": [[c.real, c.imag] for c in sol.coeffs],
        }
    else:
        sol = oracle.solve_functional_equation(args.kind, n, k, a, grid_size=args.grid_size)
        xs, values, errors = sol.grid, sol.values, sol.error_estimate
        dump = {"kind": args.kind, "n": n, "k": k, "a": a, "grid_intervals": len(xs) - 1,
                "estimated_error": sol.estimated_error}
    if cfg.output_format == "csv":
        header = ("x", "value", "error_estimate", "seed", "config_digest", "build_id")
        rows = [[fmt(float(x)), fmt(float(v)), fmt(float(e)), prov["seed"], prov["config_digest"], prov["build_id"]]
                for x, v, e in zip(xs, values, errors)]
        text = _csv_text(header, rows)
    else:
        dump.update(prov)
        dump["x"] = [float(x) for x in xs]
        dump["value"] = [float(v) for v in values]
        dump["error_estimate"] = [float(e) for e in errors]
        text = json.dumps(dump) + "\n"
    _emit(text, cfg.output_path)
    return EXIT_OK


def cmd_verify(args):
    selected = [int(c) for c in args.criteria.split(",")] if args.criteria else None
    if selected and any(c not in acceptance.CRITERIA for c in selected):
        raise ConfigError(f"criteria must be in 1..{max(acceptance.CRITERIA)}, got {args.criteria}")
    results = acceptance.run_all(selected, echo=print)
    reports = [r for group in results.values() for r in group]
    if args.csv:
        stats.write_reports_csv(reports, args.csv)
    failed = [r.name for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed")
    return EXIT_FAIL if failed else EXIT_OK


def compare_costs(p_grid, ns, k, cost_model):
    """Rows ``(p, n, k, ams_cost, ams_leading, direct_cost, ratio)`` from the exact oracle."""
    rows = []
    for p in p_grid:
        a = -math.log(p)
        for n in ns:
            v = oracle.spectral_v(n, k, a)(0.0)
            T = oracle.spectral_T(n, k, a)(0.0)
            ams = oracle.cost("ams", cost_model, v=v, P=p, T=T, n=n, k=k)
            factor = (cost_model.c0 + cost_model.c1 * math.log(n)) / cost_model.epsilon**2
            leading = factor * (a * a + a)
            direct = oracle.cost("direct", cost_model, p=p)
            rows.append((p, n, k, ams, leading, direct, ams / direct))
    return rows


def crossover(rows):
    """Largest ``p`` per ``n`` at which AMS is cheaper than direct sampling, if any."""
    out = {}
    for p, n, _, ams, _, direct, _ in rows:
        if ams < direct and p > out.get(n, 0.0):
            out[n] = p
    return out


def cmd_compare(args):
    cfg = load_config(args)
    cost_cfg = dict(cfg.cost)
    for name in ("c0", "c1", "epsilon"):
        value = getattr(args, name)
        if value is not None:
            cost_cfg[name] = value
    if not cost_cfg:
        raise ConfigError("compare needs a cost block (c0, c1, epsilon) in the config or as flags")
    cost_model = oracle.CostModel(**cost_cfg)
    p_grid = np.exp(-np.linspace(args.log_p_min, args.log_p_max, args.points))
    ns = [int(v) for v in args.ns.split(",")] if args.ns else [cfg.n]
    rows = compare_costs(p_grid, ns, cfg.k, cost_model)
    prov = _provenance(cfg)
    header = ("p", "n", "k", "ams_cost", "ams_leading", "direct_cost", "ratio", "seed", "config_digest", "build_id")
    body = [[fmt(float(p)), n, kk, fmt(float(c)), fmt(float(lead)), fmt(float(d)), fmt(float(r)),
             prov["seed"], prov["config_digest"], prov["build_id"]] for p, n, kk, c, lead, d, r in rows]
    if cfg.output_format == "csv":
        text = _csv_text(header, body)
    else:
        text = json.dumps({"rows": [dict(zip(header, row)) for row in body],
                           "crossover_p": {str(n): p for n, p in crossover(rows).items()}, **prov}) + "\n"
    _emit(text, cfg.output_path)
    for n, p in sorted(crossover(rows).items()):
        print(f"n={n}: AMS cheaper for p <= {p:.6g} on this grid", file=sys.stderr)
    return EXIT_OK


def _add_experiment_flags(p):
    p.add_argument("--config", help="JSON experiment file")
    p.add_argument("--model", help="model key: " + ", ".join(sorted(MODEL_REGISTRY)))
    p.add_argument("--params", help="comma-separated model parameters")
    p.add_argument("--n", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--x", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--output", help="output file (default stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="amsplit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one AMS run, JSON to stdout")
    _add_experiment_flags(p)
    p.add_argument("--rep", type=int, default=0, help="substream index")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replicate", help="M independent runs, aggregated")
    _add_experiment_flags(p)
    p.add_argument("--m-reps", dest="m_reps", type=int)
    p.add_argument("--runs-csv", help="also write per-run (J, count) records here")
    p.set_defaults(func=cmd_replicate)

    p = sub.add_parser("oracle", help="deterministic p, v or T in the exponential case")
    _add_experiment_flags(p)
    p.add_argument("--kind", choices=("p", "v", "T"), default="v")
    p.add_argument("--method", choices=("spectral", "grid"), default="spectral")
    p.add_argument("--grid-size", dest="grid_size", type=int, help="fixed grid (default: refine to 1e-8)")
    p.add_argument("--points", type=int, default=101, help="evaluation points for the spectral route")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("verify", help="run the acceptance checks")
    p.add_argument("--criteria", help="comma-separated subset, e.g. 1,3,10")
    p.add_argument("--csv", help="write one row per check here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="AMS versus direct Monte Carlo cost over a p grid")
    _add_experiment_flags(p)
    p.add_argument("--ns", help="comma-separated particle counts (default: --n)")
    p.add_argument("--c0", type=float)
    p.add_argument("--c1", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--log-p-min", dest="log_p_min", type=float, default=1.0, help="smallest -log p")
    p.add_argument("--log-p-max", dest="log_p_max", type=float, default=20.0, help="largest -log p")
    p.add_argument("--points", type=int, default=20)
    p.set_defaults(func=cmd_compare)
    return parser


def dispatch(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except RunawayError as exc:
        print(f"runaway: {exc}", file=sys.stderr)
        return EXIT_RUNAWAY
    except (ConfigError, AmsError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None):
    sys.exit(dispatch(argv))
