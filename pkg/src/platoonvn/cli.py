"""Command-line front end.

Parameters come from ``--config`` (a JSON object of NetworkParams fields,
optionally with a nested ``"simulation"`` object of SimConfig fields);
explicit flags override the config, which overrides the defaults.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np

from . import chords, counts, coverage, loads
from .distributions import _header_lines, _jsonable
from .errors import DegenerateWindow, DomainError
from .kernels import NetworkParams
from .montecarlo import (
    MODES,
    SimConfig,
    bhattacharyya,
    coverage_estimate,
    default_workers,
    simulate_chords,
    simulate_counts,
    simulate_sir,
)
from .validation import run_validation

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4

PARAM_FLAGS = {
    "lambda_L": "--lambda-L",
    "lambda_P": "--lambda-P",
    "m": "--m",
    "a": "--a",
    "lambda_b": "--lambda-b",
    "lambda_npts": "--lambda-npts",
    "alpha": "--alpha",
    "bandwidth": "--bandwidth",
}


class ConfigError(ValueError):
    pass


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# configuration --------------------------------------------------------------

def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def resolve_params(args) -> NetworkParams:
    cfg = dict(_load_config(getattr(args, "config", None)))
    cfg.pop("simulation", None)
    for field in PARAM_FLAGS:
        v = getattr(args, field, None)
        if v is not None:
            cfg[field] = v
    try:
        return NetworkParams.from_dict(cfg)
    except (TypeError, DomainError) as exc:
        raise ConfigError(str(exc)) from exc


def resolve_sim(args, p: NetworkParams, **fixed) -> SimConfig:
    sim = dict(_load_config(getattr(args, "config", None)).get("simulation", {}))
    for key in ("replications", "seed", "stream_id", "window_radius", "block_size", "workers"):
        v = getattr(args, key, None)
        if v is not None:
            sim[key] = v
    sim.update({k: v for k, v in fixed.items() if v is not None})
    sim.setdefault("workers", default_workers())
    try:
        return SimConfig(params=p, **sim)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _header(args, p: NetworkParams | None, **extra) -> dict:
    head = {"command": args.command, "code_version": code_version()}
    if p is not None:
        head["params"] = p.to_dict()
    if getattr(args, "seed", None) is not None:
        head["seed"] = args.seed
    head.update(extra)
    return head


def write_table(path: Path, header: dict, columns: list[str], rows: list[list[Any]]) -> None:
    lines = _header_lines(header)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def _out_path(args, default: str) -> Path:
    return Path(args.out) if getattr(args, "out", None) else Path(default)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


# subcommands ----------------------------------------------------------------

def cmd_pmf(args) -> int:
    p = resolve_params(args)
    kind = args.kind
    if kind == "count":
        pmf = counts.count_pmf(args.r, args.n_max, p, method=args.method, scenario=args.scenario)
        extra = {"r": args.r, "closed_form_mean": counts.scenario_mean_var(args.r, p, args.scenario)[0]}
    elif kind == "palm-count":
        pmf = counts.palm_count_pmf(args.r, args.n_max, p)
        extra = {"r": args.r, "closed_form_mean": counts.palm_count_mean(args.r, p)}
    elif kind == "typical-load":
        summ = loads.typical_load_approx(p, args.n_max or loads.LOAD_N_MAX, args.scenario)
        pmf, extra = summ.pmf, {"closed_form_mean": summ.mean, "variance": summ.variance, "p_on": summ.p_on}
    elif kind == "typical-load-exact":
        summ = loads.typical_load_exact_pmf(p, args.n_max or loads.LOAD_N_MAX, args.scenario,
                                            method="bell" if args.method == "bell" else "pgf_inversion")
        pmf, extra = summ.pmf, {"closed_form_mean": summ.mean, "variance": summ.variance}
    else:
        summ = loads.tagged_load_pmf(p, args.n_max or loads.LOAD_N_MAX, args.scenario)
        pmf, extra = summ.pmf, {"closed_form_mean": summ.mean, "variance": summ.variance}
    out = _out_path(args, f"pmf_{kind}.csv")
    head = _header(args, p, kind=kind, scenario=args.scenario, provenance=pmf.provenance,
                   tail_mass=pmf.tail_mass, pmf_mean=pmf.mean(), **extra)
    out.parent.mkdir(parents=True, exist_ok=True)
    pmf.to_csv(out, head)
    _write_json(out.with_suffix(".json"), {**head, "masses_sum": float(pmf.masses.sum()),
                                           "tolerances": {"pmf_mass_target": counts.PMF_MASS_TARGET}})
    print(f"wrote {out} (sum={pmf.masses.sum():.9f}, mean={pmf.mean():.6g})")
    return EXIT_OK


def cmd_chord(args) -> int:
    p = resolve_params(args)
    fn = chords.tagged_chord_pdf if args.kind == "tagged" else chords.typical_chord_pdf
    pdf = fn(p.lambda_b)
    out = _out_path(args, f"chord_{args.kind}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    pdf.to_csv(out, _header(args, p, kind=args.kind, mean=pdf.mean(),
                            joint_mass=chords.joint_pdf_mass(p.lambda_b)))
    print(f"wrote {out} (mean={pdf.mean():.6g} km)")
    return EXIT_OK


def cmd_load(args) -> int:
    p = resolve_params(args)
    typ = loads.typical_load_approx(p, scenario=args.scenario)
    tag = loads.tagged_load_pmf(p, scenario=args.scenario)
    metrics = loads.operational_metrics(typ.pmf, tag.pmf, typ.p_on)
    report = {**_header(args, p, scenario=args.scenario),
              "typical": {"mean": typ.mean, "variance": typ.variance, "p_on": typ.p_on},
              "tagged": {"mean": tag.mean, "variance": tag.variance}, "metrics": metrics}
    out = _out_path(args, f"load_{args.scenario}.json")
    _write_json(out, report)
    print(json.dumps(_jsonable(metrics), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_coverage(args) -> int:
    p = resolve_params(args)
    taus = np.asarray(args.tau, float)
    curve = coverage.rate_coverage_curve(taus, p, args.scenario)
    out = _out_path(args, f"coverage_{args.scenario}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    curve.to_csv(out, _header(args, p))
    for t, v in zip(curve.thresholds, curve.values):
        print(f"tau={t:.6g} bit/s  r_c={v:.6f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    p = resolve_params(args)
    cfg = resolve_sim(args, p, mode=args.mode, scenario=args.scenario, radius=args.r,
                      pooled=args.pooled or None, silencing=args.silencing, p_on=args.p_on)
    out = _out_path(args, f"sim_{cfg.mode}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    head = _header(args, p, simulation=cfg.to_dict())
    if cfg.mode == "sir":
        s = simulate_sir(cfg)
        taus = args.sir_tau or [1.0]
        rows = [[t, *coverage_estimate(s, t)] for t in taus]
        write_table(out, head, ["tau_sir", "coverage", "std_error"], rows)
    elif cfg.mode == "chord":
        seg = simulate_chords(cfg)
        write_table(out, head, ["l1_km", "l2_km"], seg.tolist())
    else:
        dist = simulate_counts(cfg)
        dist.to_csv(out, head)
        dist.to_json(out.with_suffix(".json"))
        print(f"mean={dist.mean():.6g} sem={dist.sem():.3g} cells={dist.total}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    only = [int(x) for x in args.only.split(",")] if args.only else None

    def progress(res):
        print(f"criterion {res['id']} ({res['title']}): {'PASS' if res['passed'] else 'FAIL'}", flush=True)
        for c in res["checks"]:
            if not c["passed"]:
                print(f"    failed: {c['name']} measured={c['measured']}", flush=True)

    try:
        report = run_validation(only, seed=args.seed, quick=args.quick, progress=progress)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report["code_version"] = code_version()
    if args.report:
        _write_json(Path(args.report), report)
    return EXIT_OK if report["passed"] else EXIT_VALIDATION


# figures ----------------------------------------------------------------------

def _mu_values(quick):
    return [5.0, 15.0, 30.0] if quick else [5.0, 10.0, 15.0, 20.0, 25.0, 30.0]


def _lb_values(quick):
    return [2.0, 5.0, 10.0] if quick else [2.0, 3.0, 5.0, 7.5, 10.0, 15.0, 20.0, 30.0]


def _scenario_params(base: NetworkParams, mu: float, scenario: str) -> NetworkParams:
    if scenario == "PTS":
        return base.replace(m=mu / base.lambda_P)
    return base.replace(lambda_npts=mu)


def figure_3(args, base, out_dir):
    reps = args.replications or (2000 if args.quick else 10_000)
    rows, pmf_rows = [], []
    for lb in (5.0, 10.0):
        for m in ((15,) if args.quick else (5, 10, 15)):
            p = base.replace(m=float(m), lambda_b=lb)
            for i, kind in enumerate(("typical_load", "tagged_load")):
                an = (loads.typical_load_approx(p) if kind == "typical_load" else loads.tagged_load_pmf(p)).pmf
                mc = simulate_counts(SimConfig(p, mode=kind, replications=reps, seed=args.seed,
                                               stream_id=int(lb) * 1000 + m * 10 + i,
                                               workers=args.workers or default_workers()))
                rows.append([kind, m, lb, bhattacharyya(an, mc), an.mean(), mc.mean(), reps])
                q = mc.normalized()
                for n in range(max(an.n_max, mc.n_max) + 1):
                    pmf_rows.append([kind, m, lb, n, an.p(n), q[n] if n < q.size else 0.0])
    head = _header(args, base, figure=3, replications=reps)
    write_table(out_dir / "fig3_bc.csv", head, ["cell", "m", "lambda_b", "bc", "mean_analytic", "mean_mc",
                                                "replications"], rows)
    write_table(out_dir / "fig3_pmfs.csv", head, ["cell", "m", "lambda_b", "n", "p_analytic", "p_mc"], pmf_rows)


def figure_4(args, base, out_dir):
    rows = []
    for mu in _mu_values(args.quick):
        for a in (0.05, 0.25, 1.0):
            p = _scenario_params(base.replace(a=a), mu, "PTS")
            tag = loads.tagged_load_pmf(p)
            rows.append(["PTS", mu, a, p.lambda_m / p.lambda_b, loads.typical_load_variance(p), tag.mean,
                         tag.variance])
        p = _scenario_params(base, mu, "NPTS")
        tag = loads.tagged_load_pmf(p, scenario="NPTS")
        rows.append(["NPTS", mu, float("nan"), p.kappa / p.lambda_b, loads.typical_load_variance(p, "NPTS"),
                     tag.mean, tag.variance])
    write_table(out_dir / "fig4_mean_variance.csv", _header(args, base, figure=4),
                ["scenario", "mu", "a_km", "typical_mean", "typical_variance", "tagged_mean", "tagged_variance"],
                rows)


def figure_5(args, base, out_dir):
    rows = []
    for mu in _mu_values(args.quick):
        vals = {sc: loads.p_on(_scenario_params(base, mu, sc), sc) for sc in ("PTS", "NPTS")}
        rows.append([mu, 1.0 - vals["PTS"], 1.0 - vals["NPTS"]])
    write_table(out_dir / "fig5a_p_off.csv", _header(args, base, figure="5a"), ["mu", "p_off_pts", "p_off_npts"],
                rows)
    _lambda_b_sweep(args, base, out_dir / "fig5b_p_less.csv", "5b")


def _lambda_b_sweep(args, base, path, fig):
    rows = []
    for lb in _lb_values(args.quick):
        for sc in ("PTS", "NPTS"):
            p = base.replace(lambda_b=lb)
            met = loads.scenario_metrics(p, sc)
            rows.append([sc, lb, met["p_on"], met["p_on"] * lb, 1.0 - met["p_on"], met["s_avg"], met["p_less"],
                         met["P1"], met["m_avg"], met["P_less"]])
    write_table(path, _header(args, base, figure=fig),
                ["scenario", "lambda_b", "p_on", "active_density", "p_off", "s_avg", "p_less", "P1", "m_avg",
                 "P_less"], rows)


def figure_6(args, base, out_dir):
    _lambda_b_sweep(args, base, out_dir / "fig6_p_less.csv", 6)


def figure_7(args, base, out_dir):
    rows = []
    b2 = base.replace(lambda_L=2.0)
    for mu in _mu_values(args.quick):
        for sc in ("PTS", "NPTS"):
            tag = loads.tagged_load_pmf(_scenario_params(b2, mu, sc), scenario=sc)
            rows.append([sc, mu, tag.pmf.p(1)])
    write_table(out_dir / "fig7a_P1.csv", _header(args, b2, figure="7a"), ["scenario", "mu", "P1"], rows)
    _lambda_b_sweep(args, base, out_dir / "fig7bc_tagged.csv", "7bc")


def figure_8(args, base, out_dir):
    rows = []
    taus = (0.5e6, 2e6)
    for lb in _lb_values(args.quick):
        p = base.replace(lambda_b=lb)
        row = [lb]
        for sc in ("PTS", "NPTS"):
            tag = loads.tagged_load_pmf(p, scenario=sc).pmf
            pon = loads.p_on(p, sc)
            row += [pon * lb] + [coverage.rate_coverage_from_pmf(t, tag, pon, p.alpha, p.bandwidth)[0]
                                 for t in taus]
        rows.append(row)
    cols = ["lambda_b"]
    for sc in ("pts", "npts"):
        cols += [f"active_density_{sc}"] + [f"r_c_{sc}_tau{t / 1e6:g}M" for t in taus]
    write_table(out_dir / "fig8_rate_coverage.csv", _header(args, base, figure=8), cols, rows)


FIGURES = {3: figure_3, 4: figure_4, 5: figure_5, 6: figure_6, 7: figure_7, 8: figure_8}


def cmd_figure(args) -> int:
    base = resolve_params(args)
    out_dir = Path(args.out or "figures")
    out_dir.mkdir(parents=True, exist_ok=True)
    FIGURES[args.n](args, base, out_dir)
    print(f"wrote figure {args.n} tables to {out_dir}")
    return EXIT_OK


# parser -----------------------------------------------------------------------

def _add_params(sp):
    sp.add_argument("--config", help="JSON file of parameter fields")
    for field, flag in PARAM_FLAGS.items():
        sp.add_argument(flag, dest=field, type=float, default=None)
    sp.add_argument("--out", help="output path (file or directory)")


def _add_sim(sp):
    sp.add_argument("--replications", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--stream-id", dest="stream_id", type=int)
    sp.add_argument("--window-radius", dest="window_radius", type=float)
    sp.add_argument("--block-size", dest="block_size", type=int)
    sp.add_argument("--workers", type=int, help="worker processes (default: available cores)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="platoonvn", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=code_version())
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("pmf", help="write an analytic PMF")
    _add_params(sp)
    sp.add_argument("--kind", required=True,
                    choices=["count", "palm-count", "typical-load", "typical-load-exact", "tagged-load"])
    sp.add_argument("--r", type=float, default=0.5, help="ball radius in km (count kinds)")
    sp.add_argument("--n-max", dest="n_max", type=int)
    sp.add_argument("--method", default="bell", choices=["bell", "bell_literal", "pgf_inversion"])
    sp.add_argument("--scenario", default="PTS", choices=["PTS", "NPTS"])
    sp.set_defaults(func=cmd_pmf)

    sp = sub.add_parser("chord", help="write a chord-length density")
    _add_params(sp)
    sp.add_argument("--kind", default="tagged", choices=["tagged", "typical"])
    sp.set_defaults(func=cmd_chord)

    sp = sub.add_parser("load", help="load summaries and operational metrics")
    _add_params(sp)
    sp.add_argument("--scenario", default="PTS", choices=["PTS", "NPTS"])
    sp.set_defaults(func=cmd_load)

    sp = sub.add_parser("coverage", help="rate coverage curve")
    _add_params(sp)
    sp.add_argument("--tau", type=float, nargs="+", default=[0.5e6, 2e6], help="rate thresholds in bit/s")
    sp.add_argument("--scenario", default="PTS", choices=["PTS", "NPTS"])
    sp.set_defaults(func=cmd_coverage)

    sp = sub.add_parser("simulate", help="Monte Carlo simulation")
    _add_params(sp)
    _add_sim(sp)
    sp.add_argument("--mode", default=None, choices=list(MODES))
    sp.add_argument("--scenario", default=None, choices=["PTS", "NPTS"])
    sp.add_argument("--r", type=float, default=None, help="ball radius for count modes")
    sp.add_argument("--pooled", action="store_true")
    sp.add_argument("--silencing", default=None, choices=["thinned", "load_coupled"])
    sp.add_argument("--p-on", dest="p_on", type=float, default=None)
    sp.add_argument("--sir-tau", dest="sir_tau", type=float, nargs="+")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("figure", help="data tables behind a figure")
    _add_params(sp)
    sp.add_argument("n", type=int, choices=sorted(FIGURES))
    sp.add_argument("--quick", action="store_true", help="coarser sweeps")
    sp.add_argument("--replications", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_figure)

    sp = sub.add_parser("validate", help="run the acceptance checks")
    sp.add_argument("--quick", action="store_true", help="reduced replications and sweeps")
    sp.add_argument("--only", help="comma-separated criterion ids")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--report", help="write the JSON report here")
    sp.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, DegenerateWindow) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
