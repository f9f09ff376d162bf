"""Batch command-line interface.

Subcommands form a pipeline over a shared output directory:
synth -> features -> train -> (explain | score) -> (evaluate | players).
Every stage writes a meta.json with the config hash and seed that produced
it; re-running a stage with the same hash is a no-op unless --force.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import team_eval
from .aggregate import AggRule, score_match, rows_to_csv, MatchMetricRow
from .features import FEATURE_NAMES, FEATURE_SETS
from .gbt import GbtParams, feature_importance_gain
from .labels import DatasetArrays, concat_datasets, datasets_from_arrays
from .model_eval import kfold_cv, load_model, partial_dependence, save_model
from .player_eval import (attribute_and_total, lines_to_csv,
                          match_attributions, rank_players, stability,
                          InsufficientPairs, QUANTITIES)
from .synth import SynthConfig, season_fixtures, simulate_match, \
    write_ground_truth
from .tracking import arrays_to_frames, frames_to_arrays, \
    parse_tracking_file, serialize_frames

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class UpstreamArtifactMissing(FileNotFoundError):
    pass


DEFAULT_CONFIG = {
    "synth": {
        "n_teams": 6,
        "n_seasons": 2,
        "seed": 7,
        "base_possessions": 32.0,
        "home_advantage": 0.2,
    },
    "features": {
        "stride": 30,
    },
    "train": {
        "cv_folds": 5,
        "cv_seed": 0,
        "l2_lambda": 1e-6,
        "gbt_rounds": 150,
        "gbt_depth": 5,
        "gbt_learning_rate": 0.1,
    },
    "explain": {
        "top_features": 10,
        "pdp_features": ["r", "openGoal", "speed"],
        "pdp_points": 25,
        "pdp_sample": 2000,
    },
    "score": {
        "stride": 30,
    },
    "evaluate": {
        "baseline_metric": "xG",
        "baseline_agg": "SumOfShots",
        "n_reps": 10,
        "holdout": 0.2,
        "subsample": 0.9,
    },
    "players": {
        "min_matches": 10,
        "top_n": 20,
        "rank_by": "SOE",
    },
}


def load_config(path: str | None, seed_override: int | None) -> dict:
    cfg = {k: dict(v) for k, v in DEFAULT_CONFIG.items()}
    if path is not None:
        try:
            with open(path) as fh:
                user = yaml.safe_load(fh) or {}
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"config parse error: {e}") from e
        if not isinstance(user, dict):
            raise ConfigError("config root must be a mapping")
        for section, values in user.items():
            if section not in cfg:
                raise ConfigError(f"unknown config section {section!r}")
            if not isinstance(values, dict):
                raise ConfigError(f"section {section!r} must be a mapping")
            for key, val in values.items():
                if key not in cfg[section]:
                    raise ConfigError(f"unknown key {section}.{key}")
                cfg[section][key] = val
    if seed_override is not None:
        cfg["synth"]["seed"] = seed_override
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _stage_dir(out: Path, name: str) -> Path:
    return out / name


def _is_current(stage: Path, h: str, force: bool) -> bool:
    meta = stage / "meta.json"
    if force or not meta.exists():
        return False
    try:
        return json.loads(meta.read_text()).get("config_hash") == h
    except json.JSONDecodeError:
        return False


def _write_meta(stage: Path, command: str, cfg: dict, h: str) -> None:
    (stage / "meta.json").write_text(json.dumps(
        {"command": command, "config_hash": h, "seed": cfg["synth"]["seed"]},
        indent=2) + "\n")


def _require(stage: Path, what: str) -> Path:
    if not (stage / "meta.json").exists():
        raise UpstreamArtifactMissing(
            f"{what} artifacts missing at {stage}; run `xgplus {what}` first")
    return stage


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def _synth_config(cfg: dict) -> SynthConfig:
    s = cfg["synth"]
    return SynthConfig(n_teams=int(s["n_teams"]), n_seasons=int(s["n_seasons"]),
                       seed=int(s["seed"]),
                       base_possessions=float(s["base_possessions"]),
                       home_advantage=float(s["home_advantage"]))


def _simulate_one(args):
    scfg, season, matchday, home, away = args
    return simulate_match(scfg, season, matchday, home, away)


def cmd_synth(cfg: dict, out: Path, h: str, force: bool, jobs: int) -> int:
    stage = _stage_dir(out, "synth")
    if _is_current(stage, h, force):
        log.info("synth up to date, skipping (use --force to regenerate)")
        return 0
    scfg = _synth_config(cfg)
    (stage / "matches").mkdir(parents=True, exist_ok=True)
    (stage / "truth").mkdir(parents=True, exist_ok=True)
    fixtures = list(season_fixtures(scfg))
    tasks = [(scfg, s, d, hm, aw) for s, d, hm, aw in fixtures]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_simulate_one, tasks, chunksize=4))
    else:
        results = [_simulate_one(t) for t in tasks]
    with open(stage / "fixtures.csv", "w") as fx:
        fx.write("season,matchday,home,away,home_goals,away_goals,match_id\n")
        for res in results:
            fx.write(f"{res.season},{res.matchday},{scfg.team_name(res.home)},"
                     f"{scfg.team_name(res.away)},{res.home_goals},"
                     f"{res.away_goals},{res.match_id}\n")
            text = serialize_frames(arrays_to_frames(res.arrays))
            (stage / "matches" / f"{res.match_id}.txt").write_text(text)
            with open(stage / "truth" / f"{res.match_id}.csv", "w") as tf:
                tf.write("match_id,frame_index,p_shot,p_goal\n")
                write_ground_truth(res.truth, tf)
    _write_meta(stage, "synth", cfg, h)
    log.info("wrote %d matches to %s", len(results), stage)
    return 0


def _read_fixtures(stage: Path):
    rows = []
    with open(stage / "fixtures.csv") as fh:
        next(fh)
        for line in fh:
            s, d, hm, aw, hg, ag, mid = line.rstrip("\n").split(",")
            rows.append((int(s), int(d), hm, aw, int(hg), int(ag), mid))
    return rows


def _load_match_arrays(stage: Path, match_id: str):
    with open(stage / "matches" / f"{match_id}.txt") as fh:
        return frames_to_arrays(parse_tracking_file(fh))


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def _save_dataset(path: Path, ds: DatasetArrays) -> None:
    np.savez_compressed(
        path, X=ds.X, y=ds.y,
        match_id=ds.match_id.astype(str),
        frame_index=ds.frame_index,
        possession_id=ds.possession_id.astype(str),
        carrier_id=ds.carrier_id.astype(str),
        season=ds.season if ds.season is not None else np.zeros(len(ds), np.int16))


def _load_dataset(path: Path) -> DatasetArrays:
    if not path.exists():
        raise UpstreamArtifactMissing(f"dataset missing: {path}")
    z = np.load(path, allow_pickle=False)
    return DatasetArrays(
        X=z["X"], y=z["y"],
        match_id=z["match_id"].astype(object),
        frame_index=z["frame_index"],
        possession_id=z["possession_id"].astype(object),
        carrier_id=z["carrier_id"].astype(object),
        season=z["season"])


def cmd_features(cfg: dict, out: Path, h: str, force: bool) -> int:
    stage = _stage_dir(out, "features")
    if _is_current(stage, h, force):
        log.info("features up to date, skipping")
        return 0
    synth = _require(_stage_dir(out, "synth"), "synth")
    stride = int(cfg["features"]["stride"])
    stage.mkdir(parents=True, exist_ok=True)
    xs_parts, xg_parts = [], []
    for season, _, _, _, _, _, mid in _read_fixtures(synth):
        m = _load_match_arrays(synth, mid)
        xs, xg = datasets_from_arrays(m, stride=stride)
        for ds in (xs, xg):
            ds.season = np.full(len(ds), season, dtype=np.int16)
        xs_parts.append(xs)
        xg_parts.append(xg)
    _save_dataset(stage / "xs.npz", concat_datasets(xs_parts))
    _save_dataset(stage / "xg.npz", concat_datasets(xg_parts))
    _write_meta(stage, "features", cfg, h)
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def cmd_train(cfg: dict, out: Path, h: str, force: bool) -> int:
    stage = _stage_dir(out, "train")
    if _is_current(stage, h, force):
        log.info("train up to date, skipping")
        return 0
    feats = _require(_stage_dir(out, "features"), "features")
    tr = cfg["train"]
    gbt_params = GbtParams(n_rounds=int(tr["gbt_rounds"]),
                           max_depth=int(tr["gbt_depth"]),
                           learning_rate=float(tr["gbt_learning_rate"]))
    specs = [("logistic", fs, {"kind": "logistic", "feature_set": fs,
                               "l2_lambda": float(tr["l2_lambda"])})
             for fs in FEATURE_SETS]
    specs.append(("gbt", "All", {"kind": "gbt", "params": gbt_params}))
    stage.mkdir(parents=True, exist_ok=True)
    report_lines = ["task,model,feature_set," +
                    ",".join(f"fold{i}" for i in range(int(tr["cv_folds"]))) +
                    ",mean,sd"]
    for task in ("xs", "xg"):
        ds = _load_dataset(feats / f"{task}.npz")
        for kind, fs, spec in specs:
            rep = kfold_cv(ds.X, ds.y, ds.possession_id, spec,
                           season=ds.season, k=int(tr["cv_folds"]),
                           seed=int(tr["cv_seed"]))
            report_lines.append(
                f"{task},{kind},{fs},"
                + ",".join(f"{v:.6f}" for v in rep.fold_losses)
                + f",{rep.mean:.6f},{rep.sd:.6f}")
        # final models on all data
        from .logistic import fit_logistic
        from .gbt import fit_gbt
        with open(stage / f"model_{task}_logistic_All.txt", "w") as fh:
            save_model(fit_logistic(ds.X, ds.y, "All",
                                    float(tr["l2_lambda"])), fh)
        with open(stage / f"model_{task}_gbt.txt", "w") as fh:
            save_model(fit_gbt(ds.X, ds.y, gbt_params,
                               feature_names=list(FEATURE_NAMES)), fh)
    (stage / "cv_report.csv").write_text("\n".join(report_lines) + "\n")
    _write_meta(stage, "train", cfg, h)
    return 0


def _load_models(out: Path):
    train = _require(_stage_dir(out, "train"), "train")
    with open(train / "model_xs_gbt.txt") as fh:
        xs_model = load_model(fh)
    with open(train / "model_xg_gbt.txt") as fh:
        xg_model = load_model(fh)
    return xs_model, xg_model


# ---------------------------------------------------------------------------
# explain
# ---------------------------------------------------------------------------

def _svg_curve(points, title: str) -> str:
    """Minimal standalone SVG line chart for a PDP curve."""
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    w, hgt, pad = 480, 320, 40
    x0, x1 = min(xs), max(xs) or 1.0
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1e-9
    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (w - 2 * pad)
    def sy(v):
        return hgt - pad - (v - y0) / (y1 - y0) * (hgt - 2 * pad)
    pts = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in points)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{hgt}">'
            f'<text x="{w//2}" y="20" text-anchor="middle">{title}</text>'
            f'<polyline fill="none" stroke="black" points="{pts}"/>'
            f'</svg>\n')


def cmd_explain(cfg: dict, out: Path, h: str, force: bool) -> int:
    stage = _stage_dir(out, "explain")
    if _is_current(stage, h, force):
        log.info("explain up to date, skipping")
        return 0
    feats = _require(_stage_dir(out, "features"), "features")
    xs_model, xg_model = _load_models(out)
    ex = cfg["explain"]
    stage.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(0)
    for task, model in (("xs", xs_model), ("xg", xg_model)):
        imp = feature_importance_gain(model)[:int(ex["top_features"])]
        with open(stage / f"importance_{task}.csv", "w") as fh:
            fh.write("feature,gain\n")
            for name, gain in imp:
                fh.write(f"{name},{gain:.6f}\n")
        ds = _load_dataset(feats / f"{task}.npz")
        n_sub = min(int(ex["pdp_sample"]), len(ds))
        sub = ds.X[rng.choice(len(ds), n_sub, replace=False)] if len(ds) else ds.X
        for feat in ex["pdp_features"]:
            if feat not in FEATURE_NAMES:
                raise ConfigError(f"unknown PDP feature {feat!r}")
            col = FEATURE_NAMES.index(feat)
            grid = np.linspace(ds.X[:, col].min(), ds.X[:, col].max(),
                               int(ex["pdp_points"]))
            curve = partial_dependence(model, sub, feat, grid)
            base = stage / f"pdp_{task}_{feat}"
            with open(base.with_suffix(".csv"), "w") as fh:
                fh.write("value,mean_prediction\n")
                for v, p in curve:
                    fh.write(f"{v:.6f},{p:.8f}\n")
            base.with_suffix(".svg").write_text(
                _svg_curve(curve, f"PDP {task} {feat}"))
    _write_meta(stage, "explain", cfg, h)
    return 0


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------

def cmd_score(cfg: dict, out: Path, h: str, force: bool) -> int:
    stage = _stage_dir(out, "score")
    if _is_current(stage, h, force):
        log.info("score up to date, skipping")
        return 0
    synth = _require(_stage_dir(out, "synth"), "synth")
    xs_model, xg_model = _load_models(out)
    stride = int(cfg["score"]["stride"])
    stage.mkdir(parents=True, exist_ok=True)
    all_rows = []
    for season, day, hm, aw, _, _, mid in _read_fixtures(synth):
        m = _load_match_arrays(synth, mid)
        all_rows.extend(score_match(m, xs_model, xg_model, season, day,
                                    hm, aw, stride=stride))
    with open(stage / "match_metrics.csv", "w") as fh:
        rows_to_csv(all_rows, fh)
    _write_meta(stage, "score", cfg, h)
    return 0


def _read_metric_rows(path: Path) -> list[MatchMetricRow]:
    rows = []
    with open(path) as fh:
        next(fh)
        for line in fh:
            s, d, team, opp, home, metric, agg, value, goals = \
                line.rstrip("\n").split(",")
            rows.append(MatchMetricRow(
                season=int(s), matchday=int(d), team=team, opponent=opp,
                home=bool(int(home)), metric=metric, agg=AggRule(agg),
                value=float(value), goals_scored=int(goals)))
    return rows


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def cmd_evaluate(cfg: dict, out: Path, h: str, force: bool) -> int:
    stage = _stage_dir(out, "evaluate")
    if _is_current(stage, h, force):
        log.info("evaluate up to date, skipping")
        return 0
    score = _require(_stage_dir(out, "score"), "score")
    rows = _read_metric_rows(score / "match_metrics.csv")
    ev = cfg["evaluate"]
    base_metric = ev["baseline_metric"]
    base_agg = AggRule(ev["baseline_agg"])
    stage.mkdir(parents=True, exist_ok=True)

    from .aggregate import METRIC_MENU
    folds_by = {}
    summary_lines = ["metric,agg,mse,mae,q05_fold_mse,q95_fold_mse"]
    for metric, agg in METRIC_MENU:
        folds, summary = team_eval.rolling_cv(rows, metric, agg)
        folds_by[(metric, agg)] = folds
        summary_lines.append(
            f"{metric},{agg.value},{summary.mse:.6f},{summary.mae:.6f},"
            f"{summary.interval_90[0]:.6f},{summary.interval_90[1]:.6f}")
    (stage / "cv_summary.csv").write_text("\n".join(summary_lines) + "\n")

    base_folds = folds_by[(base_metric, base_agg)]
    win_lines = ["metric,agg,n_folds,wins,ties,fraction,p_value"]
    for (metric, agg), folds in folds_by.items():
        if (metric, agg) == (base_metric, base_agg):
            continue
        wf = team_eval.matchday_win_fractions(folds, base_folds)
        win_lines.append(f"{metric},{agg.value},{wf.n_folds},{wf.wins},"
                         f"{wf.ties},{wf.fraction:.4f},{wf.p_value:.6g}")
    (stage / "win_fractions.csv").write_text("\n".join(win_lines) + "\n")

    rows_by_method = {
        f"{metric}|{agg.value}": team_eval.filter_rows(rows, metric, agg)
        for metric, agg in METRIC_MENU}
    base_key = f"{base_metric}|{base_agg.value}"
    rob = team_eval.subsample_robustness(
        rows_by_method, base_key, n_reps=int(ev["n_reps"]),
        holdout=float(ev["holdout"]), subsample=float(ev["subsample"]),
        seed=cfg["synth"]["seed"])
    rob_lines = ["method,min_diff,max_diff," +
                 ",".join(f"rep{i}" for i in range(int(ev["n_reps"])))]
    for r in rob:
        rob_lines.append(f"{r.method},{r.interval[0]:.6f},{r.interval[1]:.6f},"
                         + ",".join(f"{d:.6f}" for d in r.diffs))
    (stage / "robustness.csv").write_text("\n".join(rob_lines) + "\n")
    _write_meta(stage, "evaluate", cfg, h)
    return 0


# ---------------------------------------------------------------------------
# players
# ---------------------------------------------------------------------------

def cmd_players(cfg: dict, out: Path, h: str, force: bool) -> int:
    stage = _stage_dir(out, "players")
    if _is_current(stage, h, force):
        log.info("players up to date, skipping")
        return 0
    synth = _require(_stage_dir(out, "synth"), "synth")
    xs_model, xg_model = _load_models(out)
    pl = cfg["players"]
    stage.mkdir(parents=True, exist_ok=True)
    seconds, shots = [], []
    for season, _, _, _, _, _, mid in _read_fixtures(synth):
        m = _load_match_arrays(synth, mid)
        sec, sh, _ = match_attributions(m, xs_model, xg_model, season)
        seconds.extend(sec)
        shots.extend(sh)
    lines = attribute_and_total(seconds, shots)
    with open(stage / "player_lines.csv", "w") as fh:
        lines_to_csv(lines, fh)
    ranked = rank_players(lines, pl["rank_by"],
                          min_matches=int(pl["min_matches"]),
                          top_n=int(pl["top_n"]))
    with open(stage / f"ranking_{pl['rank_by']}.csv", "w") as fh:
        lines_to_csv(ranked, fh)
    stab_lines = ["quantity,stability"]
    for q in ("SOE", "GOE_xG", "GOE_xG+"):
        try:
            stab_lines.append(
                f"{q},{stability(lines, q, int(pl['min_matches'])):.4f}")
        except InsufficientPairs:
            stab_lines.append(f"{q},NA")
    (stage / "stability.csv").write_text("\n".join(stab_lines) + "\n")
    with open(stage / "scatter_soe_goe.csv", "w") as fh:
        fh.write("player,season,SOE,GOE_xG\n")
        for l in lines:
            if l.matches_with_chance >= int(pl["min_matches"]):
                fh.write(f"{l.player_id},{l.season},"
                         f"{QUANTITIES['SOE'](l):.4f},"
                         f"{QUANTITIES['GOE_xG'](l):.4f}\n")
    _write_meta(stage, "players", cfg, h)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="xgplus",
        description="xG+ pipeline: synthetic data, models, reports")
    p.add_argument("command",
                   choices=["synth", "features", "train", "explain",
                            "score", "evaluate", "players"])
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int, help="override synth seed")
    p.add_argument("--out", default="out", help="pipeline output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers")
    p.add_argument("--force", action="store_true",
                   help="rerun even if artifacts are current")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.seed)
        h = config_hash(cfg)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "synth":
            return cmd_synth(cfg, out, h, args.force, args.jobs)
        if args.command == "features":
            return cmd_features(cfg, out, h, args.force)
        if args.command == "train":
            return cmd_train(cfg, out, h, args.force)
        if args.command == "explain":
            return cmd_explain(cfg, out, h, args.force)
        if args.command == "score":
            return cmd_score(cfg, out, h, args.force)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, out, h, args.force)
        if args.command == "players":
            return cmd_players(cfg, out, h, args.force)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as e:
        print(json.dumps({"error": "ConfigError", "message": str(e)}),
              file=sys.stderr)
        return 2
    except UpstreamArtifactMissing as e:
        print(json.dumps({"error": "UpstreamArtifactMissing",
                          "message": str(e)}), file=sys.stderr)
        return 3
    except Exception as e:  # keep failures machine-readable
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
