"""Command-line front end: configuration, orchestration, CSV/JSON artifacts.

Subcommands: ``rates`` (scale-dependent coefficients vs their limits),
``simulate`` (one eps-level run), ``limit`` (the two-species system),
``converge`` (the full ladder certification). Runs are deterministic for a
fixed configuration; ``converge`` exits nonzero iff any report boolean fails.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import gibbs
from .convergence import StudyConfig, run_ladder_study
from .enthalpy import from_coefficients, quartic_default, validate
from .evolve_kramers import solve
from .evolve_limit import solve_limit
from .grid_forms import (LimitField, assemble, assemble_limit,
                         assemble_limit_rates, build_grid)
from .transition import k_eps, lift, limit_rate, q_eps

__all__ = ["Config", "ConfigError", "parse_config", "run", "main"]

_SCHEMES = ("CN_rannacher", "BE")
_REGIMES = ("critical", "sub", "super")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    """Validated study configuration with documented defaults."""

    profile: dict = field(default_factory=lambda: {"name": "quartic"})
    skew_gap: float = 0.0
    ladder: tuple = (0.2, 0.1, 0.05)
    eps: float = 0.1            # single-run scale for `simulate`
    nx: int = 129
    nxi: int = 161
    grading: str = "three_zone"
    quad_order: int = 4
    dt: float = 1e-3
    t_final: float = 1.0
    times: tuple = (0.1, 0.5, 1.0)
    scheme: str = "CN_rannacher"
    regime: str = "critical"
    rate: float | None = None   # manual override for `limit`; None = from profile
    u0: dict = field(default_factory=lambda: {
        "minus": {"kind": "cosine", "offset": 0.0, "amplitude": 1.0, "mode": 1},
        "plus": {"kind": "cosine", "offset": 1.0, "amplitude": 1.0, "mode": 1},
    })
    quad_tol: float = 1e-12
    out: str = "out"

    def to_dict(self):
        d = asdict(self)
        d["ladder"] = list(self.ladder)
        d["times"] = list(self.times)
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, **kw)


_U0_KINDS = ("constant", "cosine", "tabulated")


def _check_u0_side(side, spec):
    if not isinstance(spec, dict):
        raise ConfigError(f"u0.{side}: expected an object, got {type(spec).__name__}")
    kind = spec.get("kind")
    if kind not in _U0_KINDS:
        raise ConfigError(f"u0.{side}.kind: must be one of {_U0_KINDS}, got {kind!r}")
    allowed = {
        "constant": {"kind", "value"},
        "cosine": {"kind", "offset", "amplitude", "mode"},
        "tabulated": {"kind", "x", "values"},
    }[kind]
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(f"u0.{side}: unknown keys {sorted(unknown)}")
    if kind == "tabulated":
        xs, vs = spec.get("x"), spec.get("values")
        if not xs or not vs or len(xs) != len(vs):
            raise ConfigError(f"u0.{side}: 'x' and 'values' must be equal-length, nonempty")


def _u0_callable(spec):
    kind = spec["kind"]
    if kind == "constant":
        c = float(spec.get("value", 0.0))
        return lambda x: np.full_like(np.asarray(x, dtype=float), c)
    if kind == "cosine":
        off = float(spec.get("offset", 0.0))
        amp = float(spec.get("amplitude", 1.0))
        mode = int(spec.get("mode", 1))
        return lambda x: off + amp * np.cos(mode * np.pi * np.asarray(x, dtype=float))
    xs = np.asarray(spec["x"], dtype=float)
    vs = np.asarray(spec["values"], dtype=float)
    return lambda x: np.interp(np.asarray(x, dtype=float), xs, vs)


def config_from_dict(data):
    """Strictly validated Config; every violation names its field path."""
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object, got {type(data).__name__}")
    defaults = Config()
    known = set(defaults.to_dict())
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = {**defaults.to_dict(), **data}

    prof = merged["profile"]
    if isinstance(prof, str):
        prof = {"name": prof}
    if not isinstance(prof, dict) or not ({"name"} >= set(prof) or
                                          {"coeffs"} >= set(prof)):
        raise ConfigError("profile: expected {'name': ...} or {'coeffs': [...]}")
    if "name" in prof and prof["name"] != "quartic":
        raise ConfigError(f"profile.name: unknown profile {prof['name']!r}")

    ladder = tuple(float(e) for e in merged["ladder"])
    if len(ladder) < 1 or any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError("ladder: must be strictly decreasing")
    for e in ladder + (float(merged["eps"]),):
        if not gibbs.EPS_FLOOR <= e <= gibbs.EPS_CEIL:
            raise ConfigError(
                f"ladder/eps: {e} outside [{gibbs.EPS_FLOOR}, {gibbs.EPS_CEIL}] "
                "(double-precision floor: the barrier weight exp(-1/eps) "
                "drowns in roundoff during form assembly below it)")

    for name, lo in (("nx", 4), ("nxi", 4), ("quad_order", 1)):
        v = merged[name]
        if not isinstance(v, int) or v < lo:
            raise ConfigError(f"{name}: must be an integer >= {lo}, got {v!r}")
    if merged["nxi"] % 2 == 0:
        raise ConfigError("nxi: must be odd so that xi = 0 is a node")
    if merged["grading"] not in ("three_zone", "uniform"):
        raise ConfigError(f"grading: unknown grading {merged['grading']!r}")

    for name in ("dt", "t_final", "quad_tol"):
        if not float(merged[name]) > 0.0:
            raise ConfigError(f"{name}: must be positive, got {merged[name]!r}")
    if "times" not in data:
        # default sample times follow a shortened horizon
        kept = [t for t in merged["times"]
                if t <= float(merged["t_final"]) + 1e-12]
        merged["times"] = kept or [float(merged["t_final"])]
    times = tuple(float(t) for t in merged["times"])
    for t in times:
        n = round(t / float(merged["dt"]))
        if t <= 0 or t > float(merged["t_final"]) + 1e-12 \
                or abs(n * float(merged["dt"]) - t) > 1e-9:
            raise ConfigError(
                f"times: {t} must be a positive step multiple within t_final")
    if merged["scheme"] not in _SCHEMES:
        raise ConfigError(f"scheme: must be one of {_SCHEMES}")
    if merged["regime"] not in _REGIMES:
        raise ConfigError(f"regime: must be one of {_REGIMES}")
    if merged["rate"] is not None and not float(merged["rate"]) >= 0.0:
        raise ConfigError("rate: must be nonnegative or null")

    u0 = merged["u0"]
    if not isinstance(u0, dict) or set(u0) - {"minus", "plus"}:
        raise ConfigError("u0: expected {'minus': {...}, 'plus': {...}}")
    for side in ("minus", "plus"):
        if side not in u0:
            raise ConfigError(f"u0.{side}: missing")
        _check_u0_side(side, u0[side])

    return Config(profile=prof, skew_gap=float(merged["skew_gap"]),
                  ladder=ladder, eps=float(merged["eps"]),
                  nx=merged["nx"], nxi=merged["nxi"],
                  grading=merged["grading"], quad_order=merged["quad_order"],
                  dt=float(merged["dt"]), t_final=float(merged["t_final"]),
                  times=times, scheme=merged["scheme"],
                  regime=merged["regime"],
                  rate=None if merged["rate"] is None else float(merged["rate"]),
                  u0=u0, quad_tol=float(merged["quad_tol"]),
                  out=str(merged["out"]))


def parse_config(path=None, overrides=None):
    """Config from an optional JSON file plus flag overrides (strict keys)."""
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"malformed config {path}: line {exc.lineno}, column "
                f"{exc.colno}: {exc.msg}") from exc
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(data)


def profile_from_config(cfg):
    if "coeffs" in cfg.profile:
        prof = from_coefficients(cfg.profile["coeffs"])
    else:
        prof = quartic_default()
    bad = validate(prof, 1001)
    if bad:
        raise ConfigError("profile violates the double-well assumptions: "
                          + "; ".join(bad))
    return prof


def _fmt(x):
    return f"{float(x):.17g}"


def _write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else _fmt(c) for c in row])
    return path


def _write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def cmd_rates(cfg):
    """Scale-dependent coefficient table with Laplace and limit cross-checks."""
    prof = profile_from_config(cfg)
    k = limit_rate(prof)
    header = ["eps", "Z_eps", "laplace_Z", "I_shifted", "laplace_I_shifted",
              "log_tau", "k_eps", "2k_eps_over_k", "q_eps", "4q_eps"]
    rows = []
    payload = {"limit_rate": k, "half_limit_rate": 0.5 * k, "rows": []}
    for eps in cfg.ladder:
        z = math.exp(gibbs.log_partition(prof, eps, cfg.quad_tol))
        ish = math.exp(gibbs.log_barrier_integral(prof, eps, cfg.quad_tol))
        ke = k_eps(prof, eps, cfg.quad_tol)
        qe = q_eps(prof, eps)
        row = [eps, z, gibbs.laplace_z(prof, eps), ish,
               gibbs.laplace_i_shifted(prof, eps), gibbs.log_tau(eps),
               ke, 2.0 * ke / k, qe, 4.0 * qe]
        rows.append(row)
        payload["rows"].append(dict(zip(header, (float(v) for v in row))))
    rows.append(["limit", k, "", "", "", "", 0.5 * k, 1.0, 0.25, 1.0])
    out = Path(cfg.out)
    csv_path = _write_csv(out / "rates.csv", header, rows)
    _write_json(out / "rates.json", payload)
    print(f"wrote {csv_path}")
    return 0


def cmd_simulate(cfg, snapshots=()):
    """One eps-level run: per-step diagnostics CSV, optional field snapshots."""
    prof = profile_from_config(cfg)
    grid = build_grid(cfg.nx, cfg.nxi, grading=cfg.grading,
                      quad_order=cfg.quad_order)
    forms = assemble(grid, prof, cfg.eps, tol=cfg.quad_tol)
    x = grid.x_nodes
    u0 = lift(_u0_callable(cfg.u0["minus"])(x), _u0_callable(cfg.u0["plus"])(x),
              prof, cfg.eps, grid)
    traj = solve(forms, u0, cfg.t_final, cfg.dt, scheme=cfg.scheme,
                 snapshot_times=tuple(snapshots))
    out = Path(cfg.out)
    rows = zip(traj.times, traj.mass, traj.b, traj.a1, traj.a2)
    csv_path = _write_csv(out / "trajectory.csv",
                          ["t", "mass", "b_eps", "a1_eps", "a2_eps"], rows)
    for t, state in traj.snapshots:
        rows = [(xv, xiv, state.values[i, j])
                for i, xv in enumerate(grid.x_nodes)
                for j, xiv in enumerate(grid.xi_nodes)]
        _write_csv(out / f"field_t{t:g}.csv", ["x", "xi", "u"], rows)
    print(f"wrote {csv_path}")
    return 0


def cmd_limit(cfg):
    """Two-species limit run; CSV of both well densities at sampled times.

    A nonzero well-depth gap selects the two-rate variant: the gap pins the
    rate ratio exp(gap) and the pair is normalized by its geometric mean
    (equal to the symmetric rate, so the gap-zero case is recovered).
    """
    prof = profile_from_config(cfg)
    k = limit_rate(prof) if cfg.rate is None else cfg.rate
    x = np.linspace(0.0, 1.0, cfg.nx)
    if cfg.skew_gap != 0.0:
        half = 0.5 * cfg.skew_gap
        lforms = assemble_limit_rates(x, k * math.exp(half),
                                      k * math.exp(-half),
                                      quad_order=cfg.quad_order)
    else:
        lforms = assemble_limit(x, k, quad_order=cfg.quad_order)
    w0 = LimitField(_u0_callable(cfg.u0["minus"])(x),
                    _u0_callable(cfg.u0["plus"])(x), x)
    snap = tuple(sorted(set((0.0,) + cfg.times)))
    traj = solve_limit(lforms, w0, cfg.t_final, cfg.dt, scheme=cfg.scheme,
                       snapshot_times=snap)
    rows = [(t, xv, state.u_minus[i], state.u_plus[i])
            for t, state in traj.snapshots for i, xv in enumerate(x)]
    csv_path = _write_csv(Path(cfg.out) / "limit.csv",
                          ["t", "x", "u_minus", "u_plus"], rows)
    print(f"wrote {csv_path}")
    return 0


def _study_config(cfg, prof):
    return StudyConfig(profile=prof, ladder=cfg.ladder, nx=cfg.nx,
                       nxi=cfg.nxi, dt=cfg.dt, t_final=cfg.t_final,
                       times=cfg.times, scheme=cfg.scheme, regime=cfg.regime,
                       quad_order=cfg.quad_order,
                       u0_minus=_u0_callable(cfg.u0["minus"]),
                       u0_plus=_u0_callable(cfg.u0["plus"]),
                       grading=cfg.grading)


def cmd_converge(cfg, max_workers=1):
    """Full ladder certification; exit status mirrors the report booleans."""
    prof = profile_from_config(cfg)
    report = run_ladder_study(_study_config(cfg, prof), max_workers=max_workers)
    out = Path(cfg.out)
    _write_json(out / "report.json", report.to_dict())

    pairing_rows = []
    for row in report.rows:
        for name, tv in row.pairing.items():
            for t, (ve, vl, err) in tv.items():
                pairing_rows.append([row.eps, t, name, ve, vl, err])
    _write_csv(out / "pairings.csv",
               ["eps", "t", "test_function", "value_eps", "value_limit",
                "abs_error"], pairing_rows)
    form_rows = []
    for row in report.rows:
        for t in report.times:
            form_rows.append([row.eps, t, row.b_vals[t][0], row.b_vals[t][1],
                              row.b_vals[t][2], row.a_vals[t][0],
                              row.a_vals[t][1], row.a_vals[t][2],
                              row.trace_err[t]])
    _write_csv(out / "forms.csv",
               ["eps", "t", "b_eps", "b_limit", "b_error", "a_eps", "a_limit",
                "a_error", "trace_l2_error"], form_rows)

    print(f"wrote {out / 'report.json'}")
    if not report.all_ok:
        json.dump({"failed_checks": report.failures()}, sys.stderr, indent=2)
        sys.stderr.write("\n")
        return 1
    return 0


def run(subcommand, cfg, **kw):
    """Dispatch a subcommand on a validated Config; returns the exit status."""
    handlers = {"rates": cmd_rates, "simulate": cmd_simulate,
                "limit": cmd_limit, "converge": cmd_converge}
    if subcommand not in handlers:
        raise ValueError(f"unknown subcommand {subcommand!r}")
    return handlers[subcommand](cfg, **kw)


def _add_common(p):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--profile", help="profile name (quartic)")
    p.add_argument("--nx", type=int)
    p.add_argument("--nxi", type=int)
    p.add_argument("--dt", type=float)
    p.add_argument("--T", type=float, dest="t_final")
    p.add_argument("--scheme", choices=_SCHEMES)
    p.add_argument("--quad-order", type=int, dest="quad_order")


def _parse_floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="kramerslab",
        description="Numerical laboratory for the high-activation-energy "
                    "limit of a double-well drift-diffusion on a cylinder "
                    "and its two-species reaction-diffusion limit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="coefficient table along the ladder "
                       "(CSV columns: eps, Z_eps, laplace_Z, I_shifted, "
                       "laplace_I_shifted, log_tau, k_eps, 2k_eps_over_k, "
                       "q_eps, 4q_eps; final row carries the limit values)")
    _add_common(p)
    p.add_argument("--ladder", help="comma-separated decreasing eps values")

    p = sub.add_parser("simulate", help="one eps-level run "
                       "(trajectory.csv columns: t, mass, b_eps, a1_eps, "
                       "a2_eps; snapshot files: x, xi, u)")
    _add_common(p)
    p.add_argument("--eps", type=float)
    p.add_argument("--snapshots", help="comma-separated snapshot times")

    p = sub.add_parser("limit", help="two-species limit run "
                       "(limit.csv columns: t, x, u_minus, u_plus)")
    _add_common(p)
    p.add_argument("--k", type=float, dest="rate",
                   help="manual reaction rate; default derives it from the profile")
    p.add_argument("--skew-gap", type=float, dest="skew_gap",
                   help="well-depth gap; nonzero selects the two-rate variant")
    p.add_argument("--times", help="comma-separated output times")
    p.add_argument("--from-profile", action="store_true",
                   help="derive the rate from the profile (the default)")
    p.add_argument("--u0", help="constants shorthand 'c_minus,c_plus'")

    p = sub.add_parser("converge", help="ladder certification study; exit "
                       "status reflects the report booleans")
    _add_common(p)
    p.add_argument("--ladder")
    p.add_argument("--regime", choices=_REGIMES)
    p.add_argument("--times", help="comma-separated sample times")

    args = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items()
                 if k in Config.__dataclass_fields__ and v is not None}
    if getattr(args, "ladder", None):
        overrides["ladder"] = _parse_floats(args.ladder)
    if getattr(args, "times", None):
        overrides["times"] = _parse_floats(args.times)
    if getattr(args, "profile", None):
        overrides["profile"] = {"name": args.profile}
    if getattr(args, "u0", None):
        cm, cp = _parse_floats(args.u0)
        overrides["u0"] = {
            "minus": {"kind": "constant", "value": cm},
            "plus": {"kind": "constant", "value": cp},
        }

    try:
        cfg = parse_config(getattr(args, "config", None), overrides)
        kw = {}
        if args.command == "simulate" and getattr(args, "snapshots", None):
            kw["snapshots"] = _parse_floats(args.snapshots)
        if args.command == "converge":
            kw["max_workers"] = max(1, int(os.environ.get("KRAMERS_THREADS", "1")))
        return run(args.command, cfg, **kw)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
