"""Pipeline stages. Each stage reads its predecessors' files from the output
directory and writes its own, so any stage can be re-run in isolation.
"""
from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import platform
import shutil
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from . import reference
from .config import PipelineConfig
from .corpus import (
    SyntheticSpec, calendar_note, day_column, drop_exact_duplicates, enumerate_days,
    generate_synthetic, read_flights, write_corpus, write_flights,
)
from .errors import ConfigError, DataError, PipelineError, StageError
from .features import DayFeatureMatrix, aggregate_table, build_matrix, nas_daily, standardize
from .geo import groups_from_json, groups_to_json, group_airports, order_groups_by_longitude, read_airports
from .iforest import anomaly_scores, fit_iforest, scale_scores
from .kmeans import (
    KMeansModel, classify_typology, fit_kmeans, geographic_tags, profile_clusters, profiles_frame, sweep_k,
)
from .pca import fit_pca, loadings_heatmap_data, project, select_components
from .report import (
    boxplot_stats_by_cluster, cluster_order_by_anomaly, cumulative_metric_shares, day_map, day_map_svg,
    _quantile, join_day_records, outliers_above, score_cdf_by_cluster, trend_ratios,
)

log = logging.getLogger(__name__)

STAGES = ("ingest", "group", "featurize", "pca", "cluster", "score", "report")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_json(path: Path):
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise DataError(f"missing stage input {path.name}; run the preceding stage first") from None


def _read_csv(path: Path, **kw) -> pd.DataFrame:
    try:
        return pd.read_csv(path, float_precision="round_trip", **kw)
    except FileNotFoundError:
        raise DataError(f"missing stage input {path.name}; run the preceding stage first") from None


def _to_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, lineterminator="\n")


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ------------------------------------------------------------------------ stages


def synth(spec: SyntheticSpec, out_dir) -> dict:
    out = Path(out_dir)
    paths = write_corpus(generate_synthetic(spec), out)
    _write_json(out / "synth_spec.json", spec.to_dict())
    return paths


def stage_ingest(cfg: PipelineConfig, out: Path, threads: int = 1) -> dict:
    window = cfg.window.window()
    days = enumerate_days(window)
    frame, n_dupes = drop_exact_duplicates(cfg.paths.flights)
    day_set = pd.DatetimeIndex(pd.to_datetime(days))
    in_window = day_column(frame).isin(day_set).to_numpy()
    write_flights(frame[in_window], out / "flights_clean.csv")
    info = {
        "days": [d.isoformat() for d in days],
        "n_days": len(days),
        "window": {"start": cfg.window.start, "end": cfg.window.end, "exclusions": cfg.window.exclusions},
        "records_read": int(len(frame) + n_dupes),
        "exact_duplicates_dropped": int(n_dupes),
        "records_outside_window": int((~in_window).sum()),
        "records_kept": int(in_window.sum()),
        "calendar_note": calendar_note(window),
    }
    _write_json(out / "calendar.json", info)
    return info


def stage_group(cfg: PipelineConfig, out: Path, threads: int = 1) -> dict:
    groups = group_airports(read_airports(cfg.paths.airports))
    order = order_groups_by_longitude(groups)
    by_id = {g.group_id: g for g in groups}
    _write_json(out / "groups.json", {"order": order, "groups": groups_to_json([by_id[g] for g in order])})
    rows = [(code, gid) for gid in order for code in sorted(by_id[gid].members)]
    _to_csv(pd.DataFrame(rows, columns=["code", "group_id"]), out / "airport_groups.csv")
    return {"n_groups": len(groups)}


def _load_groups(out: Path):
    data = _read_json(out / "groups.json")
    return groups_from_json(data["groups"]), data["order"]


def stage_featurize(cfg: PipelineConfig, out: Path, threads: int = 1) -> dict:
    cal = _read_json(out / "calendar.json")
    days = [dt.date.fromisoformat(d) for d in cal["days"]]
    groups, order = _load_groups(out)
    frame = read_flights(out / "flights_clean.csv")
    features = aggregate_table(frame, groups, days, order)
    _to_csv(features, out / "features.csv")
    matrix = build_matrix(cal["days"], order, features)
    matrix.write_csv(out / "matrix.csv")
    _write_json(out / "matrix_stats.json", standardize(matrix).stats_json())
    nas = nas_daily(frame, days)
    _to_csv(nas, out / "nas_daily.csv")

    known = set(pd.read_csv(out / "airport_groups.csv", dtype=str)["code"])
    unresolved = int((~frame["origin"].isin(known)).sum() + (~frame["dest"].isin(known)).sum())
    return {"columns": len(matrix.columns), "unresolved_endpoints": unresolved,
            "days_without_flights": int(nas["no_flights"].sum())}


def _standardized(out: Path) -> DayFeatureMatrix:
    return standardize(DayFeatureMatrix.read_csv(out / "matrix.csv"))


def stage_pca(cfg: PipelineConfig, out: Path, threads: int = 1) -> dict:
    z = _standardized(out)
    _, order = _load_groups(out)
    model = fit_pca(z)
    k, cum = select_components(model, cfg.pca.eigenvalue_threshold)
    _write_json(out / "pca.json", model.to_json())
    for table in loadings_heatmap_data(model, order, min(cfg.pca.heatmap_components, model.loadings.shape[0])):
        frame = table.table.reset_index()
        frame.insert(1, "flag", table.flag)
        _to_csv(frame, out / f"heatmap_pc{table.component}.csv")
    scores = project(model, z, k)
    frame = pd.DataFrame(scores, columns=[f"PC{j + 1}" for j in range(k)])
    frame.insert(0, "day", z.days)
    _to_csv(frame, out / "pca_scores.csv")
    return {"n_selected": k, "cumulative_explained": cum, "jacobi_sweeps": model.sweeps}


def _pca_scores(out: Path):
    frame = _read_csv(out / "pca_scores.csv", dtype={"day": str})
    return list(frame["day"]), frame.iloc[:, 1:].to_numpy(dtype=float)


def stage_cluster(cfg: PipelineConfig, out: Path, threads: int = 1) -> dict:
    days, x = _pca_scores(out)
    kc = cfg.kmeans
    k_range = sorted(set(range(kc.sweep_min, kc.sweep_max + 1)) | {kc.k})
    sweep = sweep_k(x, k_range, kc.seed, kc.restarts, threads)
    _to_csv(sweep, out / "sweep.csv")
    model = fit_kmeans(x, kc.k, kc.seed, kc.restarts, threads)
    _to_csv(pd.DataFrame({"day": days, "cluster_id": model.assignments,
                          "distance_to_centroid": model.distances(x)}), out / "clusters.csv")
    _write_json(out / "kmeans.json", model.to_json())
    return {"k": kc.k, "inertia": model.inertia, "iterations": model.iterations}


def stage_score(cfg: PipelineConfig, out: Path, threads: int = 1) -> dict:
    ic = cfg.iforest
    if ic.input == "pca":
        days, x = _pca_scores(out)
    else:
        z = _standardized(out)
        days, x = z.days, z.values
    model = fit_iforest(x, ic.trees, ic.psi, ic.seed, threads)
    raw = anomaly_scores(model, x, threads)
    scaled = scale_scores(raw)
    _to_csv(pd.DataFrame({"day": days, "raw_score": raw, "scaled_score": scaled}), out / "anomaly.csv")
    doc = model.to_json()
    doc["input"] = ic.input
    doc["scaling"] = "corpus min-max of raw scores"
    _write_json(out / "iforest.json", doc)
    return {"max_raw": float(raw.max()), "min_raw": float(raw.min())}


def _percentiles(v) -> dict:
    v = np.sort(np.asarray(v, dtype=float))
    return {"median": _quantile(v, 0.5), "p90": _quantile(v, 0.9), "p95": _quantile(v, 0.95), "p99": _quantile(v, 0.99)}


def stage_report(cfg: PipelineConfig, out: Path, threads: int = 1) -> dict:
    groups, order = _load_groups(out)
    nas = _read_csv(out / "nas_daily.csv", dtype={"day": str})
    clusters = _read_csv(out / "clusters.csv", dtype={"day": str})
    anomaly = _read_csv(out / "anomaly.csv", dtype={"day": str})
    features = _read_csv(out / "features.csv", dtype={"day": str, "group_id": str})
    km = _read_json(out / "kmeans.json")
    days, x = _pca_scores(out)
    if list(clusters["day"]) != days or list(anomaly["day"]) != days or list(nas["day"]) != days:
        raise DataError("stage outputs disagree on the analysis day list")

    model = KMeansModel(km["k"], np.array(km["centroids"]), clusters["cluster_id"].to_numpy(),
                        km["inertia"], km["seed"], km["restarts"], km["iterations"], km["best_restart"])
    z = _standardized(out)
    tags = geographic_tags(model, z.values, z.columns, {g.group_id: g.centroid_lon for g in groups})
    profiles = classify_typology(profile_clusters(model, x, nas, anomaly["scaled_score"]), cfg.typology, tags)
    pframe = profiles_frame(profiles)
    _to_csv(pframe, out / "profiles.csv")

    opsnet = None
    if cfg.paths.opsnet:
        opsnet = pd.read_csv(cfg.paths.opsnet, dtype={"day": str}, float_precision="round_trip")
    records = join_day_records(nas, clusters, anomaly, pframe, opsnet)
    _to_csv(records, out / "day_records.csv")

    cdf = score_cdf_by_cluster(records)
    box = boxplot_stats_by_cluster(records)
    if cfg.report.disrupted_clusters is not None:
        disrupted = [int(c) for c in cfg.report.disrupted_clusters]
    else:
        disrupted = [p.cluster_id for p in profiles if p.typology in cfg.report.disrupted_types]
    by_year = trend_ratios(records, disrupted, "year")
    by_month = trend_ratios(records, disrupted, "month")
    cluster_order = cluster_order_by_anomaly(records)
    shares = cumulative_metric_shares(records, cluster_order)
    for name, frame in (("cdf", cdf), ("boxplots", box), ("trends_year", by_year),
                        ("trends_month", by_month), ("shares", shares)):
        _to_csv(frame, out / f"{name}.csv")

    if cfg.report.map_days:
        map_days = [str(d) for d in cfg.report.map_days]
    else:
        top = records.sort_values(["scaled_score", "day"], ascending=[False, True], kind="stable")
        map_days = list(top["day"].head(cfg.report.map_top))
    maps = {}
    for day in map_days:
        table = day_map(day, features, groups)
        _to_csv(table, out / f"map_{day}.csv")
        if cfg.report.svg:
            (out / f"map_{day}.svg").write_text(day_map_svg(table, title=day))
        maps[day] = table.to_dict(orient="records")

    pca = _read_json(out / "pca.json")
    doc = {
        "n_days": len(records),
        "pca": {"n_selected": pca["n_selected"], "cumulative_selected": pca["cumulative_selected"],
                "pc1_explained": pca["explained_ratio"][0]},
        "profiles": pframe.to_dict(orient="records"),
        "typology_thresholds": {"values": vars(cfg.typology), "heuristic": True},
        "disrupted_clusters": disrupted,
        "cluster_order_by_anomaly": cluster_order,
        "anomaly_percentiles": _percentiles(records["scaled_score"]),
        "anomaly_scaling": "corpus min-max of raw isolation-forest scores",
        "high_score_days_by_cluster": outliers_above(records, 0.95).to_dict(orient="records"),
        "cdf": cdf.to_dict(orient="records"),
        "boxplots": box.to_dict(orient="records"),
        "trends_year": by_year.to_dict(orient="records"),
        "trends_month": by_month.to_dict(orient="records"),
        "shares": shares.to_dict(orient="records"),
        "maps": maps,
        "reference_values": reference.as_json(),
    }
    _write_json(out / "report.json", doc)
    return {"n_clusters": len(profiles), "disrupted_clusters": disrupted}


STAGE_FUNCS = {
    "ingest": stage_ingest, "group": stage_group, "featurize": stage_featurize, "pca": stage_pca,
    "cluster": stage_cluster, "score": stage_score, "report": stage_report,
}


def run_stage(name: str, cfg: PipelineConfig, threads: int = 1) -> dict:
    out = Path(cfg.paths.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return STAGE_FUNCS[name](cfg, out, threads)
    except StageError:
        raise
    except (PipelineError, ValueError, ArithmeticError, OSError, KeyError) as exc:
        raise StageError(name, exc) from exc


def environment_fingerprint() -> dict:
    return {
        "python": platform.python_version(),
        "implementation": platform.python_implementation(),
        "system": platform.system(),
        "machine": platform.machine(),
        "byteorder": sys.byteorder,
    }


def _move_to_failed(out: Path) -> None:
    failed = out / "failed"
    if failed.exists():
        shutil.rmtree(failed)
    failed.mkdir()
    for item in sorted(out.iterdir()):
        if item.name != "failed":
            shutil.move(str(item), str(failed / item.name))


def run(cfg: PipelineConfig, threads: int = 1) -> Path:
    """Every stage in order plus ``run_manifest.json``."""
    out = Path(cfg.paths.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = {"flights": cfg.paths.flights, "airports": cfg.paths.airports}
    if cfg.paths.opsnet:
        inputs["opsnet"] = cfg.paths.opsnet
    timings, summaries = {}, {}
    try:
        for key, path in inputs.items():
            if not Path(path).exists():
                raise StageError("config", ConfigError(f"input {key} not found: {path}"))
        for name in STAGES:
            t0 = time.perf_counter()
            summaries[name] = run_stage(name, cfg, threads)
            timings[name] = round(time.perf_counter() - t0, 4)
    except StageError as exc:
        _move_to_failed(out)
        _write_json(out / "failed" / "error.json", {"stage": exc.stage, "error": str(exc.cause),
                                                    "type": type(exc.cause).__name__})
        raise

    cal = summaries["ingest"]
    notes = [cal["calendar_note"]]
    if cal["exact_duplicates_dropped"]:
        notes.append(f"dropped {cal['exact_duplicates_dropped']} exact duplicate flight rows")
    if summaries["featurize"]["unresolved_endpoints"]:
        notes.append(f"{summaries['featurize']['unresolved_endpoints']} flight endpoints reference airports "
                     "outside the registry and count toward no group")
    notes.append("typology thresholds are heuristic; scaled anomaly is corpus min-max of raw scores")
    outputs = {p.name: sha256(p) for p in sorted(out.iterdir()) if p.is_file() and p.name != "run_manifest.json"}
    echo = cfg.to_dict()
    out_path = echo["paths"].pop("out")
    manifest = {
        "config": echo,
        "inputs": {k: {"path": str(v), "sha256": sha256(v)} for k, v in inputs.items()},
        "outputs": outputs,
        "analysis_days": cal["n_days"],
        "stage_summaries": summaries,
        "notes": notes,
        "environment": environment_fingerprint(),
        "runtime": {"threads": threads, "out": out_path, "stage_seconds": timings},
    }
    _write_json(out / "run_manifest.json", manifest)
    return out
