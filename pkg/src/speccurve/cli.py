"""Command line front end.

Exit codes: 0 success, 2 usage or input error, 3 empty data, 4 numeric
failure. Numeric results go to stdout as JSON; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import apps, dng, errors, prior, spectra, validation
from .colorsystem import build_specific_system
from .estimator import EstimatorParams, optimize
from .metrics import chromaticity
from .nn import load_checkpoint, save_checkpoint
from .plot import plot_locus_svg, plot_svg

logger = logging.getLogger("speccurve")

EXIT_OK, EXIT_USAGE, EXIT_EMPTY, EXIT_NUMERIC = 0, 2, 3, 4

EMPTY_ERRORS = (errors.EmptyDatabase, errors.EmptyResults, errors.NoUsableRecords)
NUMERIC_ERRORS = (errors.NonConvergence, errors.DivergedToZero, errors.SingularSystem,
                  errors.ZeroMatrix, errors.ZeroChannel, errors.ZeroSum)


class UsageError(Exception):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def _slug(s: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in s.lower()).strip("_") or "camera"


# -- argument groups --------------------------------------------------------------

def _add_train_overrides(p):
    g = p.add_argument_group("autoencoder training")
    g.add_argument("--lr", type=float)
    g.add_argument("--momentum", type=float)
    g.add_argument("--weight-decay", type=float)
    g.add_argument("--scheduler-decay", type=float)
    g.add_argument("--patience", type=int)
    g.add_argument("--stop-lr", type=float)
    g.add_argument("--h", type=float, help="multiplicative noise amplitude")
    g.add_argument("--g", type=int, help="maximum roll in grid samples")
    g.add_argument("--dropout", choices=("retain", "drop"))
    g.add_argument("--roll-mode", choices=("per_column", "global"))
    g.add_argument("--max-steps", type=int)


def _train_params(a) -> prior.TrainParams:
    return prior.with_params(prior.TrainParams(), lr=a.lr, momentum=a.momentum,
                             weight_decay=a.weight_decay, scheduler_decay=a.scheduler_decay,
                             patience=a.patience, stop_lr=a.stop_lr, h=a.h, g=a.g,
                             dropout=a.dropout, roll_mode=a.roll_mode, max_steps=a.max_steps)


def _add_estimator_overrides(p):
    g = p.add_argument_group("estimation")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--est-lr", type=float)
    g.add_argument("--est-patience", type=int)
    g.add_argument("--est-stop-lr", type=float)
    g.add_argument("--est-max-steps", type=int)


def _estimator_params(a) -> EstimatorParams:
    over = {"alpha": a.alpha, "beta": a.beta, "lr": a.est_lr,
            "scheduler_patience": a.est_patience, "stop_lr": a.est_stop_lr,
            "max_steps": a.est_max_steps, "seed": getattr(a, "seed", None)}
    return replace(EstimatorParams(), **{k: v for k, v in over.items() if v is not None})


def _reflectances(path):
    return spectra.load_reflectance_csv(path) if path else spectra.colorchecker()


def _observed(a):
    names, R = _reflectances(a.reflectances)
    obs_names, I_obs = apps.load_rgb_csv(a.observed)
    R = apps.select_patches(names, R, obs_names)
    if R.shape[0] != I_obs.shape[0]:
        raise UsageError(f"{I_obs.shape[0]} observed rows for {R.shape[0]} reflectances")
    return R, I_obs


# -- subcommands ------------------------------------------------------------------

def cmd_extract(a) -> int:
    paths = []
    for p in map(Path, a.paths):
        if p.is_dir():
            paths.extend(sorted(q for q in p.iterdir() if q.suffix.lower() == ".dng"))
        else:
            paths.append(p)
    records = []
    for p in paths:
        try:
            records.append(dng.read_dng(p))
        except (errors.DngError, OSError) as exc:
            print(f"warning: {p}: {type(exc).__name__}: {exc}", file=sys.stderr)
    if not records:
        print("error: no usable records", file=sys.stderr)
        return EXIT_USAGE
    dng.save_records_json(a.out, records)
    print(_dump({"records": len(records), "files": len(paths)}))
    return EXIT_OK


def cmd_train(a) -> int:
    db = prior.load_database(a.db)
    res = prior.fit_autoencoder(db, exclude=a.exclude or (), params=_train_params(a),
                                seed=a.seed, group_by=a.group_by)
    save_checkpoint(res.weights, a.out)
    print(_dump({"final_loss": res.final_loss, "initial_loss": res.initial_loss,
                 "steps": res.steps, "training_ids": res.training_ids}))
    return EXIT_OK


def cmd_predict(a) -> int:
    w = load_checkpoint(a.model)
    db = prior.load_database(a.db)
    records = dng.load_records_json(a.records)
    params = _estimator_params(a)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    done, skipped = [], []
    S0 = db.mean()
    for rec in records:
        cid = rec.camera_id
        try:
            S = optimize(build_specific_system(rec.matrices), w, S0, params).S
        except errors.SpecCurveError as exc:
            skipped.append({"camera_id": cid, "reason": f"{type(exc).__name__}: {exc}"})
            print(f"warning: {cid}: {type(exc).__name__}: {exc}", file=sys.stderr)
            continue
        name = _slug(cid)
        spectra.save_sensitivity_csv(out / f"{name}.csv", S)
        if a.svg:
            plot_svg([S], out / f"{name}.svg", labels=[cid])
        done.append({"camera_id": cid, "file": f"{name}.csv"})
    summary = {"predicted": done, "skipped": skipped}
    (out / "summary.json").write_text(_dump(summary) + "\n", encoding="utf-8")
    print(_dump({"predicted": len(done), "skipped": len(skipped)}))
    if not done:
        raise errors.NoUsableRecords("no camera could be estimated")
    return EXIT_OK


def cmd_validate(a) -> int:
    db = prior.load_database(a.db)
    records = dng.load_records_json(a.records)
    rows = validation.loov_run(db, records, _train_params(a), _estimator_params(a),
                               seed=a.seed, jobs=a.jobs, group_by=a.group_by)
    summary = validation.summarize(rows)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    validation.write_results_csv(out / "results.csv", rows)
    validation.write_summary_json(out / "summary.json", summary)
    print(_dump({k: summary[k] for k in ("count", "median_re", "per_channel_medians",
                                         "best", "median", "worst")}))
    return EXIT_OK


def cmd_cct(a) -> int:
    S = spectra.load_sensitivity_csv(a.sensitivity)
    R, I_obs = _observed(a)
    print(_dump({"cct_k": apps.estimate_cct(S, R, I_obs)}))
    return EXIT_OK


def cmd_kd(a) -> int:
    S = spectra.load_sensitivity_csv(a.sensitivity)
    R, I_obs = _observed(a)
    K = apps.estimate_attenuation(S, R, I_obs, a.depth, n_hat=a.n_hat,
                                  bounds=(0.0, a.k_max))
    nodes = np.linspace(spectra.DEFAULT_GRID.lambda_min, spectra.DEFAULT_GRID.lambda_max, a.n_hat)
    print(_dump({"K": [float(k) for k in K], "nodes_nm": [float(x) for x in nodes],
                 "depth_m": a.depth}))
    return EXIT_OK


def cmd_locus(a) -> int:
    S = spectra.load_sensitivity_csv(a.sensitivity)
    locus = apps.daylight_locus(S, a.t_min, a.t_max, a.steps)
    result = {"locus": [[float(r), float(b)] for r, b in locus]}
    points = None
    if a.points:
        _, rgb = apps.load_rgb_csv(a.points)
        points = np.array([chromaticity(v) for v in rgb])
        result["points"] = []
        for p in points:
            m = apps.classify_near_locus(p, locus, a.threshold)
            result["points"].append({"rb": [float(p[0]), float(p[1])],
                                     "distance": m.distance, "on_locus": m.on_locus})
    if a.svg:
        plot_locus_svg(locus, a.svg, points)
    print(_dump(result))
    return EXIT_OK


def cmd_raw2raw(a) -> int:
    S_src = spectra.load_sensitivity_csv(a.source)
    S_tgt = spectra.load_sensitivity_csv(a.target)
    _, R = _reflectances(a.reflectances)
    available = apps.standard_illuminants()
    names = a.illuminants.split(",") if a.illuminants else list(available)
    unknown = [n for n in names if n not in available]
    if unknown:
        raise UsageError(f"unknown illuminants: {', '.join(unknown)}")
    M = apps.raw_to_raw_map(S_src, S_tgt, R, [available[n] for n in names],
                            white_balance=a.white_balance)
    print(_dump({"M": [[float(v) for v in row] for row in M], "illuminants": names}))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="speccurve", description=
                                     "Camera spectral sensitivities from color matrices.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="read color matrices from DNG files")
    p.add_argument("paths", nargs="+", help="DNG files or directories")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train the autoencoder prior")
    p.add_argument("--db", required=True, help="database manifest JSON")
    p.add_argument("--exclude", nargs="*", help="group ids to leave out")
    p.add_argument("--group-by", choices=("camera", "brand"), default="camera")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_train_overrides(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="estimate sensitivities for extracted records")
    p.add_argument("--model", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--db", required=True, help="database manifest (initial estimate)")
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    _add_estimator_overrides(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("validate", help="leave-one-out validation")
    p.add_argument("--db", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--group-by", choices=("camera", "brand"), default="camera")
    p.add_argument("--out", required=True)
    _add_train_overrides(p)
    _add_estimator_overrides(p)
    p.set_defaults(func=cmd_validate)

    for name, func, text in (("cct", cmd_cct, "daylight CCT from chart responses"),
                             ("kd", cmd_kd, "underwater attenuation from chart responses")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--sensitivity", required=True)
        p.add_argument("--observed", required=True, help="[patch,]r,g,b CSV")
        p.add_argument("--reflectances", help="patch reflectance CSV (default: ColorChecker)")
        p.set_defaults(func=func)
        if name == "kd":
            p.add_argument("--depth", type=float, required=True)
            p.add_argument("--n-hat", type=int, default=10)
            p.add_argument("--k-max", type=float, default=1.0)

    p = sub.add_parser("locus", help="daylight locus in camera chromaticity")
    p.add_argument("--sensitivity", required=True)
    p.add_argument("--t-min", type=float, default=spectra.T_MIN)
    p.add_argument("--t-max", type=float, default=spectra.T_MAX)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--points", help="r,g,b CSV of observed white points")
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_locus)

    p = sub.add_parser("raw2raw", help="global 3x3 map between two cameras")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--reflectances")
    p.add_argument("--illuminants", help="comma-separated names, e.g. A,D65,D50")
    p.add_argument("--white-balance", action="store_true")
    p.set_defaults(func=cmd_raw2raw)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except EMPTY_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except NUMERIC_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        best = getattr(exc, "best", None)
        if best is not None:
            print(_dump({"best": np.asarray(best).tolist()}), file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, errors.SpecCurveError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
