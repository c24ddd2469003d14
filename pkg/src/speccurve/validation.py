"""Leave-one-out validation and its reporting.

For every group of ground-truth curves (one camera, or one brand) an
autoencoder is trained on everything else, each camera in the group is
estimated once from its color matrices, and that single estimate is scored
against every ground-truth duplicate of the camera.
"""

from __future__ import annotations

import csv
import json
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import EmptyDatabase, EmptyResults, SpecCurveError
from .estimator import EstimatorParams, optimize
from .colorsystem import build_specific_system
from .dng import CameraRecord
from .metrics import ErrorReport, relative_full_scale_error
from .prior import SensitivityDatabase, TrainParams, fit_autoencoder, max_normalize

logger = logging.getLogger(__name__)

CSV_HEADER = ("camera_id", "source", "re_mean", "re_r", "re_g", "re_b")


@dataclass(frozen=True)
class ValidationRow:
    camera_id: str
    source: str
    report: ErrorReport | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.report is not None


@dataclass(frozen=True)
class GroupOutcome:
    group: str
    rows: list[ValidationRow]
    training_ids: list[str]
    skipped: list[str]


def normalize_id(camera_id: str) -> str:
    return " ".join(camera_id.split()).lower()


def group_seed(seed: int, group: str) -> int:
    """Seed for one group, independent of scheduling order and worker count."""
    ss = np.random.SeedSequence([seed, zlib.crc32(group.encode("utf-8"))])
    return int(ss.generate_state(1)[0])


def _run_group(db: SensitivityDatabase, group: str, group_by: str,
               records: dict[str, CameraRecord], ae_params: TrainParams,
               est_params: EstimatorParams, seed: int) -> GroupOutcome:
    with threadpool_limits(1):
        members = db.groups(group_by)[group]
        train = fit_autoencoder(db, exclude=[group], params=ae_params,
                                seed=group_seed(seed, group), group_by=group_by)
        held_out = {e.camera_id for e in members}
        leaked = held_out.intersection(train.training_ids)
        if leaked:
            raise AssertionError(f"held-out cameras {sorted(leaked)} reached training")
        S0 = db.without([group], group_by).mean()
        rows, skipped = [], []
        by_camera: dict[str, list] = {}
        for e in members:
            by_camera.setdefault(e.camera_id, []).append(e)
        for cid, entries in by_camera.items():
            rec = records.get(normalize_id(cid))
            if rec is None:
                skipped.append(cid)
                continue
            try:
                system = build_specific_system(rec.matrices)
                S_hat = optimize(system, train.weights, S0, est_params).S
            except SpecCurveError as exc:
                rows.extend(ValidationRow(cid, e.source, None, f"{type(exc).__name__}: {exc}")
                            for e in entries)
                continue
            for e in entries:
                report = relative_full_scale_error(S_hat, max_normalize(e.S))
                rows.append(ValidationRow(cid, e.source, report))
        return GroupOutcome(group, rows, train.training_ids, skipped)


def _run_group_packed(args) -> GroupOutcome:
    return _run_group(*args)


def loov_run(db: SensitivityDatabase, records, ae_params: TrainParams = TrainParams(),
             est_params: EstimatorParams = EstimatorParams(), seed: int = 0,
             jobs: int = 1, group_by: str = "camera") -> list[ValidationRow]:
    """Leave-one-group-out over ``db``.

    ``records`` maps camera ids (or is an iterable of CameraRecords) to the
    color matrices used for estimation. Groups without any record are
    skipped with a notice. Per-camera failures become rows with ``error``
    set rather than aborting the run. Results do not depend on ``jobs``.
    """
    if not db.entries:
        raise EmptyDatabase("validation needs a non-empty database")
    if isinstance(records, dict):
        rec_map = {normalize_id(k): v for k, v in records.items()}
    else:
        rec_map = {normalize_id(r.camera_id): r for r in records}
    groups = db.groups(group_by)
    tasks = []
    for group, members in groups.items():
        wanted = {normalize_id(e.camera_id) for e in members}
        if not wanted & rec_map.keys():
            logger.warning("skipping %r: no color matrices", group)
            continue
        subset = {k: rec_map[k] for k in sorted(wanted & rec_map.keys())}
        tasks.append((db, group, group_by, subset, ae_params, est_params, seed))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_group_packed, tasks))
    else:
        outcomes = [_run_group_packed(t) for t in tasks]
    rows = []
    for out in outcomes:
        logger.info("group %r trained on %d cameras: %s", out.group,
                    len(out.training_ids), ", ".join(out.training_ids))
        for cid in out.skipped:
            logger.warning("skipping %r: no color matrices", cid)
        rows.extend(out.rows)
    return rows


# -- reporting ------------------------------------------------------------------

def lower_median(values):
    v = sorted(values)
    if not v:
        raise EmptyResults("median of nothing")
    return v[(len(v) - 1) // 2]


def summarize(rows) -> dict:
    """Median RE, per-channel medians, best/median/worst and a 1%-bin histogram."""
    good = [r for r in rows if r.ok]
    if not good:
        raise EmptyResults("no successful validation rows")
    ranked = sorted(good, key=lambda r: (r.report.re_mean, r.camera_id, r.source))
    mid = ranked[(len(ranked) - 1) // 2]
    bins = [int(np.floor(r.report.re_mean * 100.0)) for r in good]
    hist = [0] * (max(bins) + 1)
    for b in bins:
        hist[b] += 1
    return {
        "count": len(good),
        "failures": [{"camera_id": r.camera_id, "source": r.source, "error": r.error}
                     for r in rows if not r.ok],
        "median_re": mid.report.re_mean,
        "per_channel_medians": [lower_median(r.report.re_per_channel[c] for r in good)
                                for c in range(3)],
        "best": ranked[0].camera_id,
        "median": mid.camera_id,
        "worst": ranked[-1].camera_id,
        "histogram": hist,
    }


def write_results_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in rows:
            if r.ok:
                w.writerow([r.camera_id, r.source, repr(r.report.re_mean),
                            *(repr(v) for v in r.report.re_per_channel)])


def read_results_csv(path) -> list[ValidationRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [ValidationRow(d["camera_id"], d["source"],
                              ErrorReport(float(d["re_mean"]),
                                          (float(d["re_r"]), float(d["re_g"]), float(d["re_b"])),
                                          (float("nan"),) * 3))
                for d in reader]


def write_summary_json(path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
