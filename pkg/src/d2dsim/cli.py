"""Command-line front end: single-pair analysis, region maps, campaigns, sweeps.

Settings come from (highest first) command-line flags, ``D2DSIM_*``
environment variables, a flat ``key = value`` config file, and the defaults
of ``CampaignConfig`` / ``SweepSpec``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from dataclasses import dataclass

from .policy import PolicyContext, four_node_preset, region_map_text
from .simulator import SCHEMES, CampaignConfig, Metrics, run_campaign
from .throughput import DEFAULT_QUAD, analyze, lambda_star

ENV_PREFIX = "D2DSIM_"
CSV_HEADER = ["scheme", "W", "xi_db", "n_levels", "omega_c", "omega_d", "omega_total",
              "stderr_c", "stderr_d", "n_topologies", "seed"]
FIGURES = ("fig3", "fig4", "fig5", "fig6")

class ConfigError(ValueError):
    pass

@dataclass(frozen=True)
class SweepSpec:
    w_values: tuple = (1, 2, 3, 4, 5, 6)
    xi_db_values: tuple = tuple(range(0, 21, 2))
    schemes: tuple = ("CMP", "GEO")
    n_levels: tuple = (1,)
    out: str | None = None

    def __post_init__(self):
        for name in ("w_values", "xi_db_values", "schemes", "n_levels"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must not be empty")
        if any(int(w) != w or w < 1 for w in self.w_values):
            raise ValueError("w_values must be positive integers")
        if any(s not in SCHEMES for s in self.schemes):
            raise ValueError(f"schemes must be drawn from {SCHEMES}")

def _list_of(conv):
    return lambda s: tuple(conv(x) for x in s.replace(",", " ").split())

_CAMPAIGN_FIELDS = {f.name: f for f in dataclasses.fields(CampaignConfig)}
_SWEEP_PARSERS = {"w_values": _list_of(int), "xi_db_values": _list_of(float),
                  "schemes": _list_of(str.upper), "n_levels_values": _list_of(int),
                  "out": str}

def _converter(name):
    if name in _SWEEP_PARSERS:
        return _SWEEP_PARSERS[name]
    typ = _CAMPAIGN_FIELDS[name].type
    if typ in ("int", int):
        return int
    if typ in ("float", float):
        return float
    if name == "scheme":
        return lambda s: s.strip().upper()
    return str

KNOWN_KEYS = tuple(_CAMPAIGN_FIELDS) + tuple(_SWEEP_PARSERS)
_ENV_KEYS = {k.lower(): k for k in KNOWN_KEYS}

def _convert(key, raw, where):
    try:
        return _converter(key)(raw)
    except ValueError as e:
        raise ConfigError(f"{where}: bad value {raw!r} for {key}: {e}") from None

def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}") from None
    out = {}
    for n, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{n}: expected 'key = value', got {text!r}")
        key, raw = (s.strip() for s in text.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        if not raw:
            raise ConfigError(f"{path}:{n}: empty value for {key}")
        out[key] = (_convert(key, raw, f"{path}:{n}"), f"{path}:{n}")
    return out

def read_env(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = _ENV_KEYS.get(name[len(ENV_PREFIX):].lower())
        if key is None:
            raise ConfigError(f"environment variable {name}: unknown key")
        out[key] = (_convert(key, raw, name), name)
    return out

_FLAG_KEYS = {"scheme": "scheme", "W": "W", "xi_db": "xi_db", "levels": "n_levels",
              "topologies": "n_topologies", "slots": "epoch_len", "seed": "seed",
              "out": "out", "workers": "workers"}

def parse_config(path=None, flags: dict | None = None, environ=None):
    """Merge defaults < file < environment < flags into (CampaignConfig, SweepSpec).

    Range errors name the line (or variable) the offending value came from.
    """
    merged = {}
    if path is not None:
        merged.update(read_config_file(path))
    merged.update(read_env(environ))
    for k, v in (flags or {}).items():
        if v is not None:
            merged[k] = (v, f"flag --{k}")
    camp = {k: v for k, (v, _) in merged.items() if k in _CAMPAIGN_FIELDS}
    for k, (v, where) in merged.items():
        if k in _CAMPAIGN_FIELDS:
            try:
                CampaignConfig(**{k: v})
            except ValueError as e:
                raise ConfigError(f"{where}: {k} = {v!r} out of range: {e}") from None
    try:
        config = CampaignConfig(**camp)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    sweep_kw = {}
    for k in ("w_values", "xi_db_values", "schemes", "out"):
        if k in merged:
            sweep_kw[k] = merged[k][0]
    if "n_levels_values" in merged:
        sweep_kw["n_levels"] = merged["n_levels_values"][0]
    try:
        sweep = SweepSpec(**sweep_kw)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return config, sweep

def metrics_row(config: CampaignConfig, m: Metrics) -> dict:
    return {"scheme": config.scheme, "W": config.W, "xi_db": config.xi_db,
            "n_levels": config.n_levels, "omega_c": m.omega_c, "omega_d": m.omega_d,
            "omega_total": m.omega_total, "stderr_c": m.stderr_c, "stderr_d": m.stderr_d,
            "n_topologies": m.n_topologies, "seed": config.seed}

def _fmt(v):
    if isinstance(v, float):
        return "%.6g" % v
    return str(v)

def emit_csv(rows, path=None) -> str:
    """Write rows under the fixed header; returns the text. ``path=None`` writes nothing."""
    lines = [",".join(CSV_HEADER)]
    for r in rows:
        lines.append(",".join(_fmt(r[k]) for k in CSV_HEADER))
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text

def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))

def figure_points(fig_id: str, config: CampaignConfig, sweep: SweepSpec):
    """Campaign configs of one figure, in output order."""
    if fig_id not in FIGURES:
        raise ValueError(f"unknown figure {fig_id!r}; choose from {FIGURES}")
    pts = []
    if fig_id == "fig6":
        for W in sweep.w_values:
            pts.append(dataclasses.replace(config, scheme="GEO", W=W, n_levels=1))
            pts.append(dataclasses.replace(config, scheme="CMP", W=W, n_levels=1, xi_db=20.0))
            pts.append(dataclasses.replace(config, scheme="CMP", W=W, n_levels=20))
        return pts
    for W in sweep.w_values:
        for xi in sweep.xi_db_values:
            for scheme in sweep.schemes:
                pts.append(dataclasses.replace(config, scheme=scheme, W=W, xi_db=float(xi), n_levels=1))
    return pts

def _cache_key(c: CampaignConfig):
    # GEO ignores W and xi, NONE ignores everything but the geometry
    if c.scheme == "GEO":
        return dataclasses.replace(c, W=1, xi_db=0.0, n_levels=1)
    if c.scheme == "NONE":
        return dataclasses.replace(c, W=1, xi_db=0.0, n_levels=1, kappa=0.0)
    if c.n_levels > 1:
        return dataclasses.replace(c, xi_db=0.0)
    return c

def run_figure(fig_id: str, config: CampaignConfig, sweep: SweepSpec = SweepSpec(), progress=None):
    """CSV rows of one figure. Points whose result cannot depend on the swept
    value (GEO over xi and W) are simulated once."""
    rows, cache = [], {}
    for c in figure_points(fig_id, config, sweep):
        key = _cache_key(c)
        if key not in cache:
            cache[key] = run_campaign(c)
            if progress:
                progress(c, cache[key])
        rows.append(metrics_row(c, cache[key]))
    return rows

def _build_parser():
    p = argparse.ArgumentParser(prog="d2dsim", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--scheme", type=str.upper, choices=SCHEMES)
    common.add_argument("--W", type=int, help="blockage duration in slots")
    common.add_argument("--xi-db", dest="xi_db", type=float, help="D2D target SNR (N=1)")
    common.add_argument("--levels", type=int, help="number of DUE power levels")
    common.add_argument("--topologies", type=int, help="topologies per parameter point")
    common.add_argument("--slots", type=int, help="slots per epoch")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("--out", help="output file (default: stdout)")
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", parents=[common], help="tau, sigma and lam* of one pair")
    a.add_argument("--gammas", help="gamma_sd,gamma_sb,gamma_ud,gamma_ub (default: four-node preset)")
    a.add_argument("--lam", type=float, help="report at this lam instead of lam*")
    r = sub.add_parser("regions", parents=[common], help="MR level map of the four-node preset")
    r.add_argument("--lam", type=float, default=1.0)
    r.add_argument("--grid", type=int, default=101)
    r.add_argument("--h-max", dest="h_max", type=float, default=5.0)
    sub.add_parser("campaign", parents=[common], help="one parameter point")
    f = sub.add_parser("figure", parents=[common], help="full parameter sweep")
    f.add_argument("fig_id", choices=FIGURES)
    return p

def _write(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

def _analyze_context(args, config):
    if args.gammas:
        vals = [float(x) for x in args.gammas.split(",")]
        if len(vals) != 4:
            raise ConfigError("--gammas needs four comma-separated values")
        return PolicyContext(*vals, theta=config.params.theta, lam=1.0, n_levels=config.n_levels)
    return four_node_preset(1.0)

def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    flags = {_FLAG_KEYS[k]: v for k, v in vars(args).items() if k in _FLAG_KEYS}
    try:
        config, sweep = parse_config(args.config, flags)
    except ConfigError as e:
        print(f"d2dsim: {e}", file=sys.stderr)
        return 2
    out = flags.get("out") or sweep.out
    if args.command == "analyze":
        ctx = _analyze_context(args, config)
        W = config.W
        ls = lambda_star(ctx, W, DEFAULT_QUAD)
        lam = ls.lam if args.lam is None else args.lam
        r = analyze(ctx.with_lambda(lam), W, DEFAULT_QUAD)
        text = (f"lambda_star={ls.lam:.6g}\nlambda={lam:.6g}\ntau={r.tau:.6g}\nsigma={r.sigma:.6g}\n"
                f"p_del={r.p_del:.6g}\np_blo={r.p_blo:.6g}\np_tx={r.p_tx:.6g}\n")
        _write(text, out)
    elif args.command == "regions":
        _write(region_map_text(four_node_preset(args.lam), args.h_max, args.grid), out)
    elif args.command == "campaign":
        _write(emit_csv([metrics_row(config, run_campaign(config))]), out)
    else:
        def progress(c, m):
            print(f"{c.scheme} W={c.W} xi_db={c.xi_db:g} N={c.n_levels}: "
                  f"omega_total={m.omega_total:.4f}", file=sys.stderr)
        _write(emit_csv(run_figure(args.fig_id, config, sweep, progress)), out)
    return 0

if __name__ == "__main__":
    sys.exit(main())
