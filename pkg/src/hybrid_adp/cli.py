"""Command-line front end: ``adp certify-data | validate | run | sweep``.

Exit codes: 0 success, 1 validation or certification failure (also bad
configuration), 2 I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .critic import MODES, MOMENTUM
from .errors import AdpError, CertificateRequired, NumericalFailure, ValidationFailed
from .experiment import (
    SWEEP_VARIABLES,
    compare_modes,
    load_config,
    resolve_problem,
    run_experiment,
    run_sweep,
    tuning_report,
    critic_tuning,
    write_json,
    write_sweep_csv,
)

EXIT_OK, EXIT_FAIL, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("hybrid_adp")


def _parse_value(text: str):
    text = text.strip()
    if text == "T*":
        return text
    if text.startswith("["):
        return json.loads(text)
    return float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("certify-data", "validate", "run", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment JSON; defaults reproduce the builtin example")
        p.add_argument("--builtin-example", action="store_true", help="use the builtin example defaults")
        p.add_argument("--mode", choices=list(MODES) + ["both"])
        p.add_argument("--force", action="store_true", help="run even when tuning validation fails")
        p.add_argument("--out", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "certify-data":
            p.add_argument("--save-dataset", help="also write the resolved dataset as JSON")
        if name == "sweep":
            p.add_argument("--variable", choices=SWEEP_VARIABLES)
            p.add_argument("--values", help="semicolon-separated values; 'T*' allowed for T, JSON index lists for lambda")
            p.add_argument("--workers", type=int, default=None)
    return parser


def _config(args) -> dict:
    overrides = {}
    if args.mode:
        overrides["mode"] = args.mode
    if args.force:
        overrides["force"] = True
    if args.out:
        overrides["out"] = args.out
    path = None if args.builtin_example and not args.config else args.config
    return load_config(path, overrides)


def cmd_certify_data(cfg: dict, save_dataset=None) -> int:
    problem = resolve_problem(cfg)
    cert = problem.certificate
    report = {
        "samples": len(problem.dataset),
        "Lambda": cert.Lambda,
        "lambda_min": cert.lambda_min,
        "lambda_max": cert.lambda_max,
        "richness_floor": cert.richness_floor,
        "rich": cert.rich,
    }
    print(f"samples      {len(problem.dataset)}")
    print(f"lambda_min   {cert.lambda_min:.6e}")
    print(f"lambda_max   {cert.lambda_max:.6e}")
    print(f"verdict      {'rich' if cert.rich else 'NOT rich'} (floor {cert.richness_floor:g})")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "certificate.json", report)
    if save_dataset:
        problem.dataset.save(save_dataset)
    return EXIT_OK if cert.rich else EXIT_FAIL


def cmd_validate(cfg: dict) -> int:
    problem = resolve_problem(cfg)
    if not problem.certificate.lambda_min > 0:
        raise CertificateRequired("dataset has zero richness; cannot validate tuning")
    mode = MOMENTUM if cfg["mode"] == "both" else cfg["mode"]
    report = tuning_report(problem, critic_tuning(cfg, mode))
    for key in ("lambda_min", "lower_gap", "upper_gap", "excitation_gap", "eta", "M_T_min_eig", "T_star"):
        print(f"{key:<15}{report[key]:.6g}")
    print(f"verdict        {'ok' if report['tuning_ok'] else 'FAIL'}")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "validation.json", report)
    return EXIT_OK if report["tuning_ok"] else EXIT_FAIL


def cmd_run(cfg: dict) -> int:
    problem = resolve_problem(cfg)
    modes = list(MODES) if cfg["mode"] == "both" else [cfg["mode"]]
    results = {m: run_experiment(cfg, m, problem=problem, out_dir=cfg["out"]) for m in modes}
    for m, res in results.items():
        s = res.summary
        print(f"[{m}] jumps={s['jump_count']} |x|={s['final_x_norm']:.3e} "
              f"theta_c err={s.get('final_theta_c_error_inf', float('nan')):.3e} "
              f"settling={s.get('settling_time')}" + (" (forced)" if s["forced"] else ""))
    if len(results) == 2:
        comparison = compare_modes(results)
        write_json(Path(cfg["out"]) / "comparison.json", comparison)
        print(f"momentum faster: {comparison['momentum_faster']}")
    return EXIT_OK


def cmd_sweep(cfg: dict, variable=None, values=None, workers=None) -> int:
    sweep = dict(cfg.get("sweep") or {})
    variable = variable or sweep.get("variable")
    values = values if values is not None else sweep.get("values")
    workers = workers or sweep.get("workers", 1)
    rows, _ = run_sweep(cfg, variable, values, workers=workers)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out / f"sweep_{variable}.csv", rows)
    for r in rows:
        print(f"{variable}={r['value']} [{r['mode']}] settling={r['settling_time']} "
              f"final_err={r['final_error']} rate={r['rate']}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "certify-data":
            return cmd_certify_data(cfg, args.save_dataset)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        values = None
        if args.values is not None:
            values = [_parse_value(v) for v in args.values.split(";") if v.strip()]
        return cmd_sweep(cfg, args.variable, values, args.workers)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}; last good stamp {exc.stamp}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationFailed, CertificateRequired) as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (AdpError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
