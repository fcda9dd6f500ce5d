"""Command-line front end.

Every subcommand accepts ``--config FILE`` (a JSON object whose keys mirror
the long flag names, e.g. {"sigma": 0.1, "N": 100, "grid_points": 2001});
flags given on the command line win over the file.

Exit codes: 0 ok, 2 bad configuration, 3 I/O failure, 4 regime precondition.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import analytics, error_control, oracle, series
from ._mp import DEFAULT_PRECISION, to_decimal_string
from .coefficients import ModelParams, Truncation, build_full, build_truncated, residual_check

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_REGIME = 0, 2, 3, 4

DEFAULTS = {
    "sigma": None,
    "epsilon": 0.0,
    "eta": 0.0,
    "N": 100,
    "K": 4,
    "t": None,
    "t_days": None,
    "t_months": None,
    "tol": 0.05,
    "grid_sd": analytics.GRID_SPAN_SD,
    "grid_points": analytics.GRID_POINTS,
    "prec_bits": DEFAULT_PRECISION,
    "threads": None,
    "out": None,
    "format": "csv",
    "full": False,
    "x": 0.0,
    "q": [3.0, 4.0],
    "side": "left",
    "k_max": 7,
    "n_step": 10,
    "bulk": 3.0,
    "digits": 30,
    "scan_tol": 1e-12,
    "dump_symbol": None,
}


class ConfigError(Exception):
    pass


def _common(p: argparse.ArgumentParser):
    S = argparse.SUPPRESS
    p.add_argument("--config", default=None, help="JSON file with default values")
    p.add_argument("--sigma", type=float, default=S, help="volatility")
    p.add_argument("--epsilon", type=float, default=S, help="bid-offer spread width")
    p.add_argument("--eta", type=float, default=S, help="buyer/seller imbalance in [-1, 1]")
    p.add_argument("--N", type=int, default=S, help="series rows kept (default 100)")
    p.add_argument("--K", type=int, default=S, help="PDE truncation order (default 4)")
    p.add_argument("--t", type=float, default=S, help="horizon")
    p.add_argument("--t-days", dest="t_days", type=float, default=S, help="horizon in days (1 day = 0.004)")
    p.add_argument("--t-months", dest="t_months", type=float, default=S,
                   help="horizon in months (1 month = 0.08)")
    p.add_argument("--tol", type=float, default=S, help="relative error tolerance (default 0.05)")
    p.add_argument("--grid-sd", dest="grid_sd", type=float, default=S, help="grid half-width in sd")
    p.add_argument("--grid-points", dest="grid_points", type=int, default=S, help="odd number of grid points")
    p.add_argument("--prec-bits", dest="prec_bits", type=int, default=S, help="mantissa bits (default 256)")
    p.add_argument("--threads", type=int, default=S, help="worker processes for grid evaluation")
    p.add_argument("--out", default=S, help="output file (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="illiquid-fp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("coeffs", help="build the coefficient table and write it as JSON")
    _common(p)
    p.add_argument("--full", action="store_true", default=S, help="use the untruncated recurrence")

    p = sub.add_parser("density", help="density on a symmetric grid")
    _common(p)
    p.add_argument("--digits", type=int, default=S)

    p = sub.add_parser("tails", help="tail probabilities beyond q sd")
    _common(p)
    p.add_argument("--q", type=float, nargs="+", default=S)
    p.add_argument("--side", choices=["left", "right"], default=S)

    p = sub.add_parser("moments", help="empirical moments against the closed forms")
    _common(p)

    p = sub.add_parser("cutoff", help="ratio estimate, minimum time and safe K")
    _common(p)
    p.add_argument("--x", type=float, default=S)
    p.add_argument("--k-max", dest="k_max", type=int, default=S)

    p = sub.add_parser("oracle", help="exact lattice law and comparison with the series")
    _common(p)
    p.add_argument("--bulk", type=float, default=S)
    p.add_argument("--dump-symbol", dest="dump_symbol", default=S, help="write omega,re,im CSV here")

    for name in ("table1", "table2", "table3"):
        p = sub.add_parser(name, help=f"regenerate {name}")
        _common(p)

    p = sub.add_parser("scan-k", help="sup |p_(K+1) - p_K| over the mid tails")
    _common(p)
    p.add_argument("--k-max", dest="k_max", type=int, default=S)

    p = sub.add_parser("scan-n", help="value against N at one point")
    _common(p)
    p.add_argument("--x", type=float, default=S)
    p.add_argument("--n-step", dest="n_step", type=int, default=S)
    p.add_argument("--scan-tol", dest="scan_tol", type=float, default=S)
    p.add_argument("--digits", type=int, default=S)
    return parser


def resolve_config(ns: argparse.Namespace) -> dict:
    """Defaults, then the --config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise OSError(f"cannot read config {ns.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {ns.config} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(doc)
    for key, value in vars(ns).items():
        if key in DEFAULTS:
            cfg[key] = value
    return cfg


def _horizon(cfg: dict, required: bool = True):
    given = [k for k in ("t", "t_days", "t_months") if cfg.get(k) is not None]
    if len(given) > 1:
        raise ConfigError("give only one of --t, --t-days, --t-months")
    if not given:
        if required:
            raise ConfigError("a horizon is required: --t, --t-days or --t-months")
        return None
    key = given[0]
    t = float(cfg[key]) * {"t": 1.0, "t_days": analytics.DAY, "t_months": analytics.MONTH}[key]
    if not (math.isfinite(t) and t > 0):
        raise ConfigError(f"horizon must be positive and finite, got {t}")
    return t


def _params(cfg: dict) -> ModelParams:
    if cfg.get("sigma") is None:
        raise ConfigError("--sigma is required")
    try:
        return ModelParams(float(cfg["sigma"]), float(cfg["epsilon"]), float(cfg["eta"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _trunc(cfg: dict) -> Truncation:
    try:
        return Truncation(int(cfg["N"]), int(cfg["K"]), int(cfg["prec_bits"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _validate(cfg: dict):
    tol = float(cfg["tol"])
    if not 0 < tol < 1:
        raise ConfigError(f"--tol must be in (0, 1), got {tol}")
    gp = int(cfg["grid_points"])
    if gp < 3 or gp % 2 == 0:
        raise ConfigError(f"--grid-points must be odd and >= 3, got {gp}")
    if not (math.isfinite(float(cfg["grid_sd"])) and float(cfg["grid_sd"]) > 0):
        raise ConfigError("--grid-sd must be positive")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"unknown format {cfg['format']!r}")


def _workers(cfg: dict) -> int:
    return int(cfg["threads"]) if cfg.get("threads") else series.default_workers()


def _emit(cfg: dict, text: str):
    if cfg.get("out"):
        with open(cfg["out"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _grid(cfg, params, trunc, t):
    table = build_truncated(params, trunc)
    xs = analytics.symmetric_grid(params.sigma, t, float(cfg["grid_sd"]), int(cfg["grid_points"]))
    return series.eval_grid(table, xs, t, _workers(cfg))


def cmd_coeffs(cfg):
    params, trunc = _params(cfg), _trunc(cfg)
    table = build_full(params, trunc) if cfg.get("full") else build_truncated(params, trunc)
    res = residual_check(table)
    _emit(cfg, table.to_json() + "\n")
    print(f"kind={table.kind} N={table.N} K={trunc.K} residual={to_decimal_string(res, 6)}",
          file=sys.stderr)


def cmd_density(cfg):
    params, trunc, t = _params(cfg), _trunc(cfg), _horizon(cfg)
    grid = _grid(cfg, params, trunc, t)
    digits = int(cfg["digits"])
    if cfg["format"] == "json":
        doc = {"t": t, "points": [
            {"x": float(x), "density": to_decimal_string(p.value, digits),
             "max_monomial": to_decimal_string(p.max_monomial, digits),
             "final_over_max": to_decimal_string(p.final_over_max, digits)}
            for x, p in zip(grid.xs, grid.points)]}
        _emit(cfg, _json(doc))
    else:
        _emit(cfg, grid.to_csv(digits))


def cmd_tails(cfg):
    params, trunc, t = _params(cfg), _trunc(cfg), _horizon(cfg)
    grid = _grid(cfg, params, trunc, t)
    gauss = _grid(cfg, params, Truncation(trunc.N, 1, trunc.precision_bits), t)
    rows = []
    for q in cfg["q"]:
        query = analytics.TailQuery(float(q), cfg["side"])
        rows.append((float(q), cfg["side"], analytics.tail_probability(grid, query),
                     analytics.tail_probability(gauss, query)))
    if cfg["format"] == "json":
        _emit(cfg, _json([dict(zip(("tail_sd", "side", "series_K", "gaussian"), r)) for r in rows]))
    else:
        lines = ["tail_sd,side,series_K,gaussian"] + [f"{q!r},{s},{a!r},{b!r}" for q, s, a, b in rows]
        _emit(cfg, "\n".join(lines) + "\n")


def cmd_moments(cfg):
    params, trunc, t = _params(cfg), _trunc(cfg), _horizon(cfg)
    grid = _grid(cfg, params, trunc, t)
    report = analytics.empirical_moments(grid)
    if cfg["format"] == "json":
        doc = {k: getattr(report, k) for k in report.__dataclass_fields__}
        doc["note"] = "published mu4 excess term is s2*t*eps; the symbol gives s2*eps^2*t"
        _emit(cfg, _json(doc))
    else:
        _emit(cfg, analytics.moments_csv(report, params, t))


def cmd_cutoff(cfg):
    params, trunc = _params(cfg), _trunc(cfg)
    K, tol, x = trunc.K, float(cfg["tol"]), float(cfg["x"])
    k_max = max(int(cfg["k_max"]), K)
    table = build_full(params, Truncation(k_max + 2, 1, trunc.precision_bits))
    try:
        ests = error_control.ratio_family(table, k_max)
    except error_control.DegenerateRatioError as exc:
        raise RegimeError(f"ratio estimate undefined: {exc}") from exc
    est = ests[K - 1]
    tmin = error_control.min_time(est, x, tol)
    t = _horizon(cfg, required=False)
    t_eval = tmin if t is None else t
    k_safe = error_control.max_safe_k(ests, t_eval, x, tol)
    doc = {"K": K, "j": est.j, "c1": float(est.c1), "c2": float(est.c2),
           "min_t": tmin, "t": t_eval, "K_safe": k_safe, "tolerance": tol, "x": x}
    if cfg["format"] == "json":
        _emit(cfg, _json(doc))
    else:
        keys = ["K", "j", "c1", "c2", "min_t", "t", "K_safe", "tolerance", "x"]
        _emit(cfg, ",".join(keys) + "\n" + ",".join(repr(doc[k]) for k in keys) + "\n")


class RegimeError(Exception):
    pass


def cmd_oracle(cfg):
    params, trunc, t = _params(cfg), _trunc(cfg), _horizon(cfg)
    if params.epsilon <= 0:
        raise RegimeError("the lattice oracle needs epsilon > 0")
    ratio = oracle.lattice_ratio(params, t)
    if ratio < oracle.MIN_LATTICE_RATIO:
        raise RegimeError(f"sigma^2 t / eps^2 = {ratio:.4g} < {oracle.MIN_LATTICE_RATIO:g}: "
                          "lattice law too discrete for a density comparison")
    if cfg.get("dump_symbol"):
        omegas = np.linspace(-2 * np.pi / params.epsilon, 2 * np.pi / params.epsilon, 401)
        with open(cfg["dump_symbol"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(oracle.symbol_csv(params, omegas))
    taylor = oracle.symbol_taylor_check(params, trunc.K)
    lattice = oracle.lattice_pmf(params, t)
    grid = _grid(cfg, params, trunc, t)
    report = oracle.compare_series_to_oracle(grid, lattice, float(cfg["bulk"]))
    if cfg["format"] == "json":
        doc = {
            "symbol_taylor_residual": taylor,
            "lattice_mass": lattice.total_mass,
            "lattice_cumulants": list(oracle.lattice_cumulants(lattice)),
            "symbol_cumulants": list(oracle.oracle_cumulants(params, t)),
            "lattice_ratio": report.lattice_ratio,
            "max_rel_error": report.max_rel_error,
            "mean_rel_error": report.mean_rel_error,
            "n_points": report.n_points,
        }
        _emit(cfg, _json(doc))
    else:
        _emit(cfg, lattice.to_csv())
    print(f"taylor_residual={taylor:.3e} mass={lattice.total_mass!r} "
          f"max_rel_error={report.max_rel_error:.4e} mean_rel_error={report.mean_rel_error:.4e}",
          file=sys.stderr)


def _table(cfg, which):
    sigma = 0.1 if cfg.get("sigma") is None else float(cfg["sigma"])
    bits = int(cfg["prec_bits"])
    if which == "table1":
        eps = 0.005 if not cfg.get("epsilon") else float(cfg["epsilon"])
        t = _horizon(cfg, required=False) or analytics.DAY
        res = analytics.reproduce_table1(sigma, eps, t, int(cfg["N"]), precision_bits=bits)
    elif which == "table2":
        eps = 0.005 if not cfg.get("epsilon") else float(cfg["epsilon"])
        res = analytics.reproduce_table2(sigma, eps, int(cfg["K"]), int(cfg["N"]), precision_bits=bits,
                                         span_sd=float(cfg["grid_sd"]), points=int(cfg["grid_points"]),
                                         workers=_workers(cfg))
    else:
        epss = (0.005, 0.002) if not cfg.get("epsilon") else (float(cfg["epsilon"]),)
        res = analytics.reproduce_table3(sigma, epss, tolerance=float(cfg["tol"]), precision_bits=bits)
    _emit(cfg, _json(res.summary()) if cfg["format"] == "json" else res.to_csv())


def cmd_scan_k(cfg):
    params, trunc, t = _params(cfg), _trunc(cfg), _horizon(cfg)
    tables = [build_truncated(params, Truncation(trunc.N, K, trunc.precision_bits))
              for K in range(1, int(cfg["k_max"]) + 2)]
    xs = error_control.mid_tail_grid(params.sigma, t)
    d = error_control.divergence_scan(tables, xs, t)
    if cfg["format"] == "json":
        _emit(cfg, _json({"t": t, "d_K": {str(k): v for k, v in enumerate(d, start=1)}}))
    else:
        _emit(cfg, "K,d_K\n" + "".join(f"{k},{v!r}\n" for k, v in enumerate(d, start=1)))


def cmd_scan_n(cfg):
    params, trunc, t = _params(cfg), _trunc(cfg), _horizon(cfg)
    step = int(cfg["n_step"])
    table = build_truncated(params, trunc)
    Ns = list(range(step, trunc.N + 1, step)) or [trunc.N]
    if Ns[-1] != trunc.N:
        Ns.append(trunc.N)
    fam = series.family_over_n(table, Ns)
    x = float(cfg["x"])
    n0, values = series.convergence_in_n(fam, x, t, float(cfg["scan_tol"]))
    rows = []
    for i, (N, v) in enumerate(zip(Ns, values)):
        change = "" if i == 0 else repr(float(abs(v - values[i - 1]) / abs(v))) if v else "inf"
        rows.append((N, to_decimal_string(v, int(cfg["digits"])), change))
    if cfg["format"] == "json":
        _emit(cfg, _json({"x": x, "t": t, "stabilized_at": n0,
                          "values": [dict(zip(("N", "value", "rel_change"), r)) for r in rows]}))
    else:
        body = "".join(f"{a},{b},{c}\n" for a, b, c in rows)
        _emit(cfg, "N,value,rel_change\n" + body)
    print(f"stabilized_at={n0 if n0 is not None else 'not stabilized'}", file=sys.stderr)


COMMANDS = {
    "coeffs": cmd_coeffs,
    "density": cmd_density,
    "tails": cmd_tails,
    "moments": cmd_moments,
    "cutoff": cmd_cutoff,
    "oracle": cmd_oracle,
    "table1": lambda cfg: _table(cfg, "table1"),
    "table2": lambda cfg: _table(cfg, "table2"),
    "table3": lambda cfg: _table(cfg, "table3"),
    "scan-k": cmd_scan_k,
    "scan-n": cmd_scan_n,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = resolve_config(ns)
        _validate(cfg)
        COMMANDS[ns.command](cfg)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RegimeError, oracle.RegimeError, oracle.CoverageError) as exc:
        print(f"{parser.prog}: regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except OSError as exc:
        print(f"{parser.prog}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def run():
    sys.exit(main())
