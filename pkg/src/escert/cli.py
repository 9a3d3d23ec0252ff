"""Command-line front end.

Subcommands::

    escert run CONFIG.json [--set key=value ...]     full config-file driver
    escert simulate-ct --config F [--out PATH] [--diagnostics]
    escert simulate-dt --config F [--out PATH] [--diagnostics]
    escert certify-ct  (--config F | --golden ID) [--route R] [--out PATH] [--verify N]
    escert certify-dt  (--config F | --golden ID) [--route R] [--out PATH] [--verify N]
    escert recheck CERT.json                         re-verify a stored certificate
    escert tables [--which 1,3,6] [--outdir DIR]
    escert identities (--config F | --n N [--epsilon E | --T T] [--amplitudes a,b,..]) [--out PATH]

Config schema (JSON, top level): mode, map, uncertainty, dither, gains,
route, sim, cert, output, seed.  See README for the field-by-field layout.
Exit codes: 0 success, 2 config error, 3 infeasible certification,
4 envelope violation (verify mode).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from escert import golden
from escert.cert_ct import certify_ct
from escert.cert_dt import certify_dt
from escert.errors import InfeasibleError, SimulationDiverged
from escert.oracle import envelope_sweep
from escert.quadmap import DitherSpec, GainSpec, QuadraticMap, UncertaintyModel, dither_identities
from escert.sim_ct import CtSimConfig, compute_transformation_ct, simulate_ct
from escert.sim_dt import DtSimConfig, compute_transformation_dt, simulate_dt

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_ENVELOPE = 4


class ConfigError(ValueError):
    pass


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _apply_overrides(cfg: dict, overrides) -> dict:
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        keys = dotted.split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
        node[keys[-1]] = value
    return cfg


def _require(cfg: dict, key: str) -> dict:
    if key not in cfg:
        raise ConfigError(f"config is missing the {key!r} section")
    return cfg[key]


def parse_map(section: dict) -> QuadraticMap:
    return QuadraticMap(section["q_star"], section["theta_star"], section["hessian"])


def parse_uncertainty(section: dict) -> UncertaintyModel:
    return UncertaintyModel(
        q_star_max=section["q_star_max"],
        hessian_nominal=section["hessian_nominal"],
        kappa=section.get("kappa", 0.0),
        h_min=section["h_min"],
        h_max=section["h_max"],
        sigma0=section["sigma0"],
        diagonal_hessian=section.get("diagonal_hessian", False),
    )


def parse_dither(section: dict) -> DitherSpec:
    return DitherSpec(
        amplitudes=section["amplitudes"],
        freq_indices=section["freq_indices"],
        period=section["period"],
        domain=section.get("domain", "continuous"),
    )


def parse_gains(section) -> GainSpec:
    if isinstance(section, dict):
        section = section["gains"]
    return GainSpec(section)


def _write_json(payload: dict, path) -> None:
    if path in (None, "-"):
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


def cmd_simulate(cfg: dict, domain: str, out=None, diagnostics=False) -> int:
    qmap = parse_map(_require(cfg, "map"))
    dither = parse_dither(_require(cfg, "dither"))
    gains = parse_gains(_require(cfg, "gains"))
    sim = _require(cfg, "sim")
    out = out or cfg.get("output", {}).get("path") or "trajectory.csv"
    diagnostics = diagnostics or sim.get("diagnostics", False)
    if domain == "ct":
        config = CtSimConfig(qmap, dither, gains, sim["theta_hat0"], sim["t_end"], sim.get("step"))
        traj = simulate_ct(config)
        if diagnostics:
            traj = compute_transformation_ct(traj, dither, gains, qmap)
    else:
        config = DtSimConfig(qmap, dither, gains, sim["epsilon"], sim["theta_hat0"], sim["k_end"])
        traj = simulate_dt(config)
        if diagnostics:
            traj = compute_transformation_dt(traj, dither, gains, qmap)
    traj.write_csv(out)
    print(f"wrote {out}")
    return EXIT_OK


def _certify_from_config(cfg: dict, domain: str):
    unc = parse_uncertainty(_require(cfg, "uncertainty"))
    dither = parse_dither(_require(cfg, "dither"))
    gains = parse_gains(_require(cfg, "gains"))
    cert_cfg = _require(cfg, "cert")
    route = cfg.get("route") or ("corollary1" if domain == "ct" else "corollary2")
    common = dict(
        sigma=cert_cfg["sigma"],
        sigma0=cert_cfg.get("sigma0"),
        route=route,
        epsilon=cert_cfg.get("epsilon"),
        beta_frac=cert_cfg.get("beta_frac", 0.1),
    )
    if domain == "ct":
        return certify_ct(unc, gains, dither, delta_override=cert_cfg.get("rate_override"), **common)
    return certify_dt(
        unc, gains, dither,
        period=cert_cfg.get("period"),
        lambda_override=cert_cfg.get("rate_override"),
        **common,
    )


def cmd_certify(cfg, domain, golden_id=None, route=None, out=None, verify=0, seed=None) -> int:
    sim_dither = None
    if golden_id:
        row = golden.golden_row(golden_id)
        if row.kind == "external":
            raise ConfigError(f"{golden_id} is an external baseline row")
        if route and route != row.route:
            row = golden.GoldenRow(**{**row.__dict__, "route": route})
        cert = row.certificate()
        sim_dither = row.sweep_dither or (row.sim.dither if row.sim else None)
    else:
        if route:
            cfg["route"] = route
        cert = _certify_from_config(cfg, domain)
    _write_json(cert.to_json_dict(), out)
    if verify:
        report = envelope_sweep(cert, draws=verify, seed=seed, sim_dither=sim_dither)
        print(
            f"envelope sweep: worst margin {report.worst_margin:.6g} at "
            f"{report.worst_location:.6g} over {report.samples} draws"
        )
        if report.violation:
            print("ENVELOPE VIOLATION", file=sys.stderr)
            return EXIT_ENVELOPE
    return EXIT_OK


def cmd_recheck(path) -> int:
    """Rebuild the certificate from its own problem block and compare."""
    stored = _load_json(path)
    problem = _require(stored, "problem")
    unc = parse_uncertainty(problem["uncertainty"])
    gains = parse_gains(problem["gains"])
    dither = parse_dither(problem["dither"])
    route = stored["route"]
    if stored["domain"] == "continuous":
        cert = certify_ct(
            unc, gains, dither,
            sigma=stored["sigma"], sigma0=stored["sigma0"], route=route,
            epsilon=stored["epsilon"],
            delta_override=None if route == "theorem1" else stored["delta"],
        )
        rate, stored_rate = cert.delta, stored["delta"]
    else:
        cert = certify_dt(
            unc, gains, dither,
            sigma=stored["sigma"], sigma0=stored["sigma0"], route=route,
            period=stored["T"], epsilon=stored["epsilon"],
            lambda_override=None if route == "theorem2" else stored["lambda"],
        )
        rate, stored_rate = cert.lam, stored["lambda"]
    checks = {
        "rate": (rate, stored_rate),
        "epsilon_star": (cert.epsilon_star, stored["epsilon_star"]),
        "ub": (cert.ub, stored["ub"]),
    }
    ok = True
    for name, (got, want) in checks.items():
        match = math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-12)
        ok = ok and match
        print(f"{name}: stored {want:.12g} recomputed {got:.12g} {'OK' if match else 'MISMATCH'}")
    return EXIT_OK if ok else EXIT_INFEASIBLE


def cmd_tables(which=None, outdir=".") -> int:
    tables = golden.TABLES if not which else tuple(which)
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    fields = [
        "table", "row", "label", "sigma0", "sigma",
        "rate_ref", "rate_computed", "eps_star_ref", "eps_star_computed",
        "ub_ref", "ub_computed", "status", "note",
    ]
    for table in tables:
        if table not in golden.TABLES:
            print(f"table {table}: no such benchmark table (have {golden.TABLES})")
            continue
        records = golden.reproduce_table(table)
        path = outdir / f"table{table}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields)
            writer.writeheader()
            for rec in records:
                writer.writerow({k: rec.get(k, "") for k in fields})
        statuses = [r["status"] for r in records if r["status"] != "baseline"]
        print(f"table {table}: wrote {path}  [{', '.join(statuses)}]")
    return EXIT_OK


def _identity_indices(n: int, period, domain: str):
    if domain == "discrete":
        if 2 * n > int(period):
            raise ConfigError(f"no {n} distinct indices exist below the |2f/T|<=1 limit for T={period}")
    return list(range(1, n + 1))


def cmd_identities(cfg=None, n=None, epsilon=None, period=None, amplitudes=None, out=None) -> int:
    if cfg is not None and "dither" in cfg:
        spec = parse_dither(cfg["dither"])
    else:
        if n is None:
            raise ConfigError("identities needs --config or --n")
        amps = amplitudes if amplitudes is not None else [0.2] * n
        if epsilon is not None:
            spec = DitherSpec(amps, _identity_indices(n, epsilon, "continuous"), epsilon)
        else:
            t = int(period) if period is not None else 2 * n + 1
            spec = DitherSpec(amps, _identity_indices(n, t, "discrete"), t, domain="discrete")
    report = dither_identities(spec)
    payload = report.to_json_dict()
    payload["amplitudes"] = spec.amplitudes.tolist()
    payload["freq_indices"] = spec.freq_indices.tolist()
    payload["period"] = spec.period
    _write_json(payload, out)
    return EXIT_OK


def cmd_run(path, overrides) -> int:
    cfg = _apply_overrides(_load_json(path), overrides)
    mode = cfg.get("mode")
    output = cfg.get("output", {})
    if mode == "simulate-ct":
        return cmd_simulate(cfg, "ct", out=output.get("path"))
    if mode == "simulate-dt":
        return cmd_simulate(cfg, "dt", out=output.get("path"))
    if mode == "certify-ct":
        return cmd_certify(cfg, "ct", out=output.get("path"),
                           verify=cfg.get("cert", {}).get("verify_draws", 0), seed=cfg.get("seed"))
    if mode == "certify-dt":
        return cmd_certify(cfg, "dt", out=output.get("path"),
                           verify=cfg.get("cert", {}).get("verify_draws", 0), seed=cfg.get("seed"))
    if mode == "tables":
        return cmd_tables(cfg.get("tables", {}).get("which"), output.get("dir", "."))
    if mode == "identities":
        return cmd_identities(cfg=cfg, out=output.get("path"))
    raise ConfigError(f"unknown or missing mode {mode!r}")


def _int_list(text: str):
    return [int(x) for x in text.split(",") if x]


def _float_list(text: str):
    return [float(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="escert", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="drive everything from a JSON config")
    p_run.add_argument("config")
    p_run.add_argument("--set", action="append", dest="overrides", metavar="KEY=VALUE")

    for name in ("simulate-ct", "simulate-dt"):
        p = sub.add_parser(name, help=f"{name.split('-')[1]} closed-loop run -> CSV")
        p.add_argument("--config", required=True)
        p.add_argument("--out")
        p.add_argument("--diagnostics", action="store_true")

    for name in ("certify-ct", "certify-dt"):
        p = sub.add_parser(name, help="compute a certificate -> JSON")
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--config")
        group.add_argument("--golden", help="benchmark row id, e.g. table1-row2")
        p.add_argument("--route")
        p.add_argument("--out")
        p.add_argument("--verify", type=int, default=0, metavar="DRAWS",
                       help="run an envelope sweep; exit 4 on violation")
        p.add_argument("--seed", type=int)

    p_re = sub.add_parser("recheck", help="re-verify a stored certificate JSON")
    p_re.add_argument("certificate")

    p_tab = sub.add_parser("tables", help="reproduce benchmark tables -> CSV per table")
    p_tab.add_argument("--which", type=_int_list, help="comma-separated table numbers")
    p_tab.add_argument("--outdir", default=".")

    p_id = sub.add_parser("identities", help="averaging-identity deviation report")
    p_id.add_argument("--config")
    p_id.add_argument("--n", type=int)
    p_id.add_argument("--epsilon", type=float)
    p_id.add_argument("--T", type=int, dest="period")
    p_id.add_argument("--amplitudes", type=_float_list)
    p_id.add_argument("--out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.overrides)
        if args.command in ("simulate-ct", "simulate-dt"):
            return cmd_simulate(_load_json(args.config), args.command.split("-")[1],
                                out=args.out, diagnostics=args.diagnostics)
        if args.command in ("certify-ct", "certify-dt"):
            cfg = _load_json(args.config) if args.config else None
            return cmd_certify(cfg, args.command.split("-")[1], golden_id=args.golden,
                               route=args.route, out=args.out, verify=args.verify, seed=args.seed)
        if args.command == "recheck":
            return cmd_recheck(args.certificate)
        if args.command == "tables":
            return cmd_tables(args.which, args.outdir)
        if args.command == "identities":
            cfg = _load_json(args.config) if args.config else None
            return cmd_identities(cfg=cfg, n=args.n, epsilon=args.epsilon,
                                  period=args.period, amplitudes=args.amplitudes, out=args.out)
        raise ConfigError(f"unknown command {args.command}")
    except (ConfigError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SimulationDiverged as exc:
        print(f"simulation diverged: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
