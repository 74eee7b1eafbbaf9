"""Command-line front end: simulate -> stats -> separate / fisher / evidence / test.

Exit status: 0 on success, 1 when an operation's contract is violated
(bad moments, rank problems, divergent evidence, ...), 2 on I/O or
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Sequence

from . import __version__, designs, files, plotting
from .config import ConfigError, RunConfig, config_hash, load_config, parse_config
from .inference import (
    ThetaProfile, compliance_test, evidence, fisher_empirical, fisher_spread, fit_robust,
)
from .separation import SettingRecord, separate
from .simulator import (
    EPRB, SG, Mixture, MixtureComponent, QuantumEPRB, QuantumSG, Quadratic, ScaledCosine,
    cos_between, model_correlation_theta, model_from_dict, model_to_dict, simulate,
)
from .stats import SummaryStatistics, standard_error_E, summarize


def _meta(command: str, arguments: dict, seed=None, inputs: Sequence[str] = ()) -> dict:
    hashed = {"command": command, "arguments": arguments,
              "inputs": {str(p): files.sha256_file(p) for p in inputs}}
    return {"command": command, "arguments": arguments, "seed": seed,
            "config_hash": config_hash(hashed), "toolkit_version": __version__}


# --- commands ---------------------------------------------------------------


def cmd_simulate(config: RunConfig, out_dir=None) -> dict:
    out = Path(out_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, cond in enumerate(config.conditions):
        seed = config.setting_seed(k)
        ds = simulate(config.model, cond, config.N, seed)
        csv_path, _ = files.write_dataset(ds, out / f"setting_{k:03d}.csv")
        entries.append({"index": k, "file": csv_path.name, "seed": seed,
                        "condition": cond.to_dict()})
    manifest = {
        "meta": {"command": "simulate", "config": config.raw, "config_hash": config.config_hash,
                 "seed": config.seed, "toolkit_version": __version__},
        "settings": entries,
    }
    files.write_json(manifest, out / "run.json")
    return manifest


def cmd_stats(csv_paths: Sequence[str]) -> dict:
    records, seeds = [], []
    for p in csv_paths:
        ds = files.read_dataset(p)
        rec = summarize(ds).to_dict()
        rec["source"] = str(p)
        rec["seed"] = ds.seed
        rec["model"] = model_to_dict(ds.model)
        records.append(rec)
        seeds.append(ds.seed)
    return {"meta": _meta("stats", {"datasets": [str(p) for p in csv_paths]}, seeds, csv_paths),
            "records": records}


def _records(report_or_list) -> list[dict]:
    if isinstance(report_or_list, dict):
        return report_or_list["records"]
    return list(report_or_list)


def cmd_separate(stats_report, tolerances: dict | None = None, weighting: str = "counts",
                 inputs: Sequence[str] = ()) -> dict:
    records = _records(stats_report)
    stats = [SummaryStatistics.from_dict(r) for r in records]
    settings = [SettingRecord.from_stats(s) for s in stats]
    result = separate(settings, weighting=weighting, **(tolerances or {}))
    report = result.to_dict()
    report["settings"] = [s.to_dict() for s in settings]
    args = {"tolerances": tolerances or {}, "weighting": weighting}
    report["meta"] = _meta("separate", args, [r.get("seed") for r in records], inputs)
    return report


def _profile_from(obj) -> ThetaProfile:
    if isinstance(obj, dict) and "points" in obj:
        return ThetaProfile.from_dict(obj)
    return ThetaProfile.from_stats([SummaryStatistics.from_dict(r) for r in _records(obj)])


def cmd_fisher(source, k_max: int = 8, inputs: Sequence[str] = (), plot=None) -> dict:
    profile = _profile_from(source)
    estimates = fisher_empirical(profile)
    fit = fit_robust(profile, K_max=k_max)
    if plot:
        plotting.plot_fisher(estimates, plot, reference=fit.fisher or None)
    seeds = [r.get("seed") for r in _records(source)] if not (
        isinstance(source, dict) and "points" in source) else None
    return {
        "meta": _meta("fisher", {"k_max": k_max}, seeds, inputs),
        "profile": profile.to_dict(),
        "estimates": [{"theta": e.theta, "fisher": e.fisher, "se": e.se} for e in estimates],
        "spread": fisher_spread(estimates),
        "fit": fit.to_dict(),
    }


def setting_angle(condition) -> float:
    if condition.kind == SG:
        if condition.M is None:
            raise ValueError("SG angle needs the moment direction M")
        return math.acos(cos_between(condition.a, condition.M))
    return math.acos(cos_between(condition.a1, condition.a2))


def cmd_evidence(csv_path, epsilon: float, theta: float | None = None, model=None) -> dict:
    ds = files.read_dataset(csv_path)
    model = ds.model if model is None else model
    theta = setting_angle(ds.condition) if theta is None else theta
    report = evidence(summarize(ds), theta, epsilon, model).to_dict()
    args = {"dataset": str(csv_path), "epsilon": epsilon, "theta": theta,
            "model": model_to_dict(model)}
    report["meta"] = _meta("evidence", args, ds.seed, [csv_path])
    return report


def cmd_test(csv_paths: Sequence[str], threshold: float = 5.0) -> dict:
    datasets = [files.read_dataset(p) for p in csv_paths]
    report = compliance_test(datasets, threshold).to_dict()
    for entry, p in zip(report["settings"], csv_paths):
        entry["source"] = str(p)
    args = {"datasets": [str(p) for p in csv_paths], "threshold_sigma": threshold}
    report["meta"] = _meta("test", args, [d.seed for d in datasets], csv_paths)
    return report


# --- demo bundle ------------------------------------------------------------

DEMO_N = 100_000
DEMO_SEED = 20160101


def _demo_config(experiment, model, settings, seed, extra=None) -> RunConfig:
    raw = {"experiment": experiment, "model": model_to_dict(model), "settings": settings,
           "N": DEMO_N, "seed": seed}
    raw.update(extra or {})
    return parse_config(raw)


def _run_stats(config: RunConfig) -> list[SummaryStatistics]:
    return [summarize(simulate(config.model, c, config.N, config.setting_seed(k)))
            for k, c in enumerate(config.conditions)]


def _separation(config: RunConfig) -> dict:
    stats = _run_stats(config)
    result = separate([SettingRecord.from_stats(s) for s in stats], **config.tolerances)
    out = result.to_dict()
    out["config"] = config.raw
    out["config_hash"] = config.config_hash
    return out


def cmd_demo(out_dir="demo_out") -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mixture = Mixture((MixtureComponent(0.75, designs.Z_HAT),
                       MixtureComponent(0.25, designs.neg(designs.Z_HAT))))
    narratives = {
        "sg_pure": _demo_config(SG, QuantumSG(), "sg-axes-6", DEMO_SEED + 1),
        "sg_mixed": _demo_config(SG, mixture, "sg-axes-6", DEMO_SEED + 2),
        "eprb_singlet": _demo_config(EPRB, QuantumEPRB(), "eprb-axes-9+6", DEMO_SEED + 3),
        "sg_quadratic": _demo_config(SG, Quadratic(), "sg-axes-6", DEMO_SEED + 4),
    }
    separations = {name: _separation(cfg) for name, cfg in narratives.items()}

    thetas = designs.theta_grid_17()
    curve_models = {
        "SG quantum": (SG, QuantumSG()),
        "SG quadratic": (SG, Quadratic()),
        "EPRB quantum": (EPRB, QuantumEPRB()),
        "EPRB scaled 0.9": (EPRB, ScaledCosine(0.9, math.pi)),
    }
    curves, rows, profiles = {}, [], {}
    for i, (label, (kind, model)) in enumerate(curve_models.items()):
        cfg = _demo_config(kind, model, "theta-grid-17", DEMO_SEED + 10 + i)
        stats = _run_stats(cfg)
        profile = ThetaProfile.from_stats(stats)
        profiles[label] = (profile, stats)
        measured = [p.E for p in profile.points]
        errors = [standard_error_E(s) for s in stats]
        exact = [model_correlation_theta(model, t) for t in thetas]
        curves[label] = (thetas, measured, errors, exact)
        for t, m, e, x in zip(thetas, measured, errors, exact):
            rows.append([label, f"{math.degrees(t):.0f}", repr(t), repr(m), repr(e), repr(x)])

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "theta_deg", "theta", "E_measured", "se", "E_exact"])
    writer.writerows(rows)
    (out / "e_theta_curves.csv").write_text(buf.getvalue(), encoding="utf-8")
    plotting.plot_e_theta(curves, out / "e_theta.png")

    inference_summary = {}
    for label in ("SG quantum", "EPRB quantum", "EPRB scaled 0.9"):
        profile, stats = profiles[label]
        estimates = fisher_empirical(profile)
        fit = fit_robust(profile)
        compliance = compliance_test(stats)
        inference_summary[label] = {
            "fit": {k: v for k, v in fit.to_dict().items() if k != "scan"},
            "fisher_spread": fisher_spread(estimates),
            "compliance": {"verdict": compliance.verdict, "max_abs_z": compliance.max_abs_z},
        }
    plotting.plot_fisher(fisher_empirical(profiles["EPRB quantum"][0]), out / "fisher_eprb.png")

    verdicts = [separations[k]["verdict"] for k in ("sg_pure", "eprb_singlet", "sg_quadratic")]
    bundle = {
        "meta": {"command": "demo", "seed": DEMO_SEED, "N": DEMO_N,
                 "config_hash": config_hash({"demo": DEMO_SEED, "N": DEMO_N}),
                 "toolkit_version": __version__},
        "verdicts": verdicts,
        "separations": separations,
        "inference": inference_summary,
    }
    files.write_json(bundle, out / "demo_report.json")
    (out / "summary.txt").write_text(_summary_text(bundle), encoding="utf-8")
    return bundle


def _summary_text(bundle: dict) -> str:
    seps = bundle["separations"]
    lines = [f"qsep {bundle['meta']['toolkit_version']} demo, seed {bundle['meta']['seed']}, "
             f"N = {bundle['meta']['N']} events per setting", ""]
    titles = {
        "sg_pure": "SG, pure source M = z",
        "sg_mixed": "SG, mixture 3/4 at +z and 1/4 at -z (<M> = 0.5 z)",
        "eprb_singlet": "EPRB, singlet-correlated pairs",
        "sg_quadratic": "SG, quadratic correlation E = (a.M)^2",
    }
    for key, title in titles.items():
        s = seps[key]
        lines.append(f"{title}")
        lines.append(f"  verdict        {s['verdict']}")
        lines.append(f"  purity         {s['purity']:.4f}")
        lines.append(f"  residual rms   {s['residual_rms']:.4f}")
        lines.append(f"  min eigenvalue {s['min_eigenvalue']:.4f}")
        if "u0" in s["coefficients"]:
            lines.append(f"  u0             {s['coefficients']['u0']:.4f}")
        lines.append("")
    lines.append("E(theta) fits on the 17-point grid")
    for label, info in bundle["inference"].items():
        fit = info["fit"]
        lines.append(f"  {label:16s} K={fit['K']} phi={fit['phi']:.4f} rms={fit['rms_error']:.4f} "
                     f"I_F spread={info['fisher_spread']:.4f} "
                     f"5-sigma test: {info['compliance']['verdict']}")
    lines.append("")
    lines.append("verdicts: " + ", ".join(bundle["verdicts"]))
    return "\n".join(lines) + "\n"


# --- argument parsing -------------------------------------------------------


def _emit(report: dict, output) -> None:
    if output:
        files.write_json(report, output)
    else:
        sys.stdout.write(files.dumps(report))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qsep {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate one CSV+JSON dataset per setting")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides output_dir)")

    p = sub.add_parser("stats", help="summarize datasets into statistics records")
    p.add_argument("datasets", nargs="+")
    p.add_argument("-o", "--output")

    p = sub.add_parser("separate", help="fit the separated representation")
    p.add_argument("stats")
    p.add_argument("--sep-tol", type=float)
    p.add_argument("--purity-tol", type=float)
    p.add_argument("--psd-tol", type=float)
    p.add_argument("--weighting", choices=["counts", "inverse-variance", "none"], default="counts")
    p.add_argument("-o", "--output")

    p = sub.add_parser("fisher", help="Fisher information and cosine fit of an E(theta) profile")
    p.add_argument("source", help="statistics report or profile JSON")
    p.add_argument("--k-max", type=int, default=8)
    p.add_argument("--plot", help="write a PNG of the Fisher estimates")
    p.add_argument("-o", "--output")

    p = sub.add_parser("evidence", help="evidence between theta and theta + epsilon")
    p.add_argument("dataset")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--theta", type=float, help="defaults to the dataset's setting angle")
    p.add_argument("--model", help="model as JSON; defaults to the generating model")
    p.add_argument("-o", "--output")

    p = sub.add_parser("test", help="k-sigma compliance test against the quantum description")
    p.add_argument("datasets", nargs="+")
    p.add_argument("--threshold", type=float, default=5.0)
    p.add_argument("-o", "--output")

    p = sub.add_parser("demo", help="run the canonical narratives end to end")
    p.add_argument("--out", default="demo_out")
    return parser


def _dispatch(args) -> None:
    if args.command == "simulate":
        cmd_simulate(load_config(args.config), args.out)
    elif args.command == "stats":
        _emit(cmd_stats(args.datasets), args.output)
    elif args.command == "separate":
        tol = {k: v for k, v in (("sep_tol", args.sep_tol), ("purity_tol", args.purity_tol),
                                 ("psd_tol", args.psd_tol)) if v is not None}
        _emit(cmd_separate(files.read_json(args.stats), tol, args.weighting, [args.stats]),
              args.output)
    elif args.command == "fisher":
        _emit(cmd_fisher(files.read_json(args.source), args.k_max, [args.source], args.plot),
              args.output)
    elif args.command == "evidence":
        try:
            model = model_from_dict(json.loads(args.model)) if args.model else None
        except ValueError as exc:
            raise ConfigError(f"--model: {exc}") from exc
        _emit(cmd_evidence(args.dataset, args.epsilon, args.theta, model), args.output)
    elif args.command == "test":
        _emit(cmd_test(args.datasets, args.threshold), args.output)
    elif args.command == "demo":
        bundle = cmd_demo(args.out)
        sys.stdout.write(f"verdicts: {', '.join(bundle['verdicts'])}\n")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _dispatch(args)
    except (ConfigError, files.DatasetFormatError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"qsep: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"qsep: contract violation: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
