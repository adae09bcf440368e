"""Experiment configuration, batch runs over (policy, K, seed), and K sweeps."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .assoc import AssociationConfig
from .metrics import evaluate
from .motfile import load_mot_ground_truth
from .scheduler import PolicyKind, SchedulerPolicy, run_pipeline
from .simworld import DetectorProfile, GroundTruthSequence, WorldConfig, generate_world, rotation_transform

log = logging.getLogger(__name__)

CSV_HEADER = ["policy", "K", "alignment", "seed", "MOTA", "IDF1", "FP", "FN", "IDSW", "GT", "FPS_sim"]
SWEEP_HEADER = ["policy", "K", "MOTA", "FPS_sim"]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


@dataclass
class ExperimentConfig:
    world: WorldConfig
    teacher: DetectorProfile
    student: DetectorProfile
    policies: list[str]
    K_values: list[int]
    seeds: list[int]
    assoc: AssociationConfig = field(default_factory=AssociationConfig)
    alignment: str = "off"
    output: str = "results"
    cell_size: int = 4
    velocity_window: int = 3
    iou_gate: float = 0.5
    gt_path: str | None = None

    def __post_init__(self) -> None:
        if not self.policies:
            raise ConfigError("policies: must be a non-empty list")
        for i, p in enumerate(self.policies):
            try:
                PolicyKind(p)
            except ValueError:
                names = ", ".join(k.value for k in PolicyKind)
                raise ConfigError(f"policies[{i}]: unknown policy {p!r} (expected one of {names})") from None
        if not self.K_values:
            raise ConfigError("K_values: must be a non-empty list")
        for i, k in enumerate(self.K_values):
            if not isinstance(k, int) or k < 1:
                raise ConfigError(f"K_values[{i}]: must be an integer >= 1, got {k!r}")
        if not self.seeds:
            raise ConfigError("seeds: must be a non-empty list")
        if self.alignment not in ("off", "on", "efm"):
            raise ConfigError(f"alignment: must be 'off', 'on' or 'efm', got {self.alignment!r}")


# ---------------------------------------------------------------- parsing

def _dataclass_from(cls, data: Any, path: str, special: dict | None = None):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    special = special or {}
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known) - set(special))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown field")
    kwargs = {}
    for name, value in data.items():
        if name in special:
            continue
        default = known[name].default
        if isinstance(default, tuple):
            if not (isinstance(value, list) and len(value) == len(default)):
                raise ConfigError(f"{path}.{name}: expected a list of {len(default)} numbers")
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _parse_transform(desc: Any, dim: int, path: str) -> np.ndarray | None:
    if desc is None or desc == "identity":
        return None
    if isinstance(desc, dict):
        unknown = set(desc) - {"rotation_deg", "seed"}
        if unknown or "rotation_deg" not in desc:
            raise ConfigError(f"{path}: expected {{'rotation_deg': angle, 'seed': n}}")
        return rotation_transform(dim, math.radians(float(desc["rotation_deg"])), int(desc.get("seed", 0)))
    if isinstance(desc, list):
        m = np.array(desc, dtype=float)
        if m.shape != (dim, dim):
            raise ConfigError(f"{path}: matrix must be {dim}x{dim}, got shape {m.shape}")
        return m
    raise ConfigError(f"{path}: expected 'identity', a rotation object or a matrix")


def _parse_profile(data: Any, name: str, dim: int) -> DetectorProfile:
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected an object")
    data = dict(data)
    transform = _parse_transform(data.pop("feature_transform", None), dim, f"{name}.feature_transform")
    if "fps" in data:
        if "cost_per_frame" in data:
            raise ConfigError(f"{name}.fps: give either fps or cost_per_frame, not both")
        fps = data.pop("fps")
        if not isinstance(fps, (int, float)) or fps <= 0:
            raise ConfigError(f"{name}.fps: must be a positive number")
        data["cost_per_frame"] = 1000.0 / fps
    data.setdefault("name", name)
    if data["name"] != name:
        raise ConfigError(f"{name}.name: must be {name!r}")
    prof = _dataclass_from(DetectorProfile, data, name)
    return dataclasses.replace(prof, feature_transform=transform)


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("<root>: expected a JSON object")
    allowed = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{key}: unknown field")
    for key in ("teacher", "student"):
        if key not in doc:
            raise ConfigError(f"{key}: missing")
    world = _dataclass_from(WorldConfig, doc.get("world", {}), "world")
    teacher = _parse_profile(doc["teacher"], "teacher", world.feature_dim)
    student = _parse_profile(doc["student"], "student", world.feature_dim)
    assoc = _dataclass_from(AssociationConfig, doc.get("assoc", {}), "assoc")
    rest = {k: v for k, v in doc.items() if k not in ("world", "teacher", "student", "assoc")}
    for key in ("policies", "K_values", "seeds"):
        if key in rest and not isinstance(rest[key], list):
            raise ConfigError(f"{key}: must be a list")
    rest.setdefault("policies", [k.value for k in PolicyKind])
    rest.setdefault("K_values", [2, 4, 6])
    rest.setdefault("seeds", [world.seed])
    for i, s in enumerate(rest["seeds"]):
        if not isinstance(s, int) or s < 0:
            raise ConfigError(f"seeds[{i}]: must be a non-negative integer, got {s!r}")
    try:
        return ExperimentConfig(world=world, teacher=teacher, student=student, assoc=assoc, **rest)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    """Read a JSON config; ``None`` loads the shipped default benchmark."""
    if path is None:
        text = resources.files("tsmot").joinpath("data/benchmark-default.json").read_text()
        where = "benchmark-default.json"
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"<file>: cannot read {path}: {exc.strerror}") from None
        where = str(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<file>: {where} is not valid JSON: {exc}") from None
    return config_from_dict(doc)


def shipped_config_path(name: str = "benchmark-default.json") -> Path:
    return Path(str(resources.files("tsmot").joinpath("data", name)))


# ---------------------------------------------------------------- running

@dataclass(frozen=True, order=True)
class RunKey:
    policy_rank: int
    K: int
    seed: int
    policy: str = field(compare=False)


@dataclass
class RunOutcome:
    policy: str
    K: int
    alignment: str
    seed: int
    mota: float
    idf1: float
    fp: int
    fn: int
    idsw: int
    gt: int
    fps_sim: float
    mot_text: str | None = None
    timing: dict | None = None


def _ground_truth(cfg: ExperimentConfig, seed: int) -> GroundTruthSequence:
    if cfg.gt_path:
        text = Path(cfg.gt_path).read_text()
        return load_mot_ground_truth(text, feature_dim=cfg.world.feature_dim, embedding_seed=cfg.world.seed,
                                     occlusion_rate=cfg.world.occlusion_rate,
                                     width=cfg.world.width, height=cfg.world.height)
    return generate_world(dataclasses.replace(cfg.world, seed=seed))


def execute_run(cfg: ExperimentConfig, policy: str, K: int, seed: int, keep_tracks: bool = False) -> RunOutcome:
    gt = _ground_truth(cfg, seed)
    pol = SchedulerPolicy(PolicyKind(policy), K, cfg.alignment)
    res = run_pipeline(gt, pol, cfg.teacher, cfg.student, cfg.assoc, seed=seed,
                       cell_size=cfg.cell_size, velocity_window=cfg.velocity_window)
    rep = evaluate(gt, res.frames, cfg.iou_gate, res.fps_simulated)
    return RunOutcome(policy, K, cfg.alignment, seed, rep.mota, rep.idf1, rep.fp, rep.fn, rep.idsw,
                      rep.gt_total, res.fps_simulated,
                      res.mot_text() if keep_tracks else None, res.timing() if keep_tracks else None)


def _execute_packed(args) -> RunOutcome:
    return execute_run(*args)


def _effective_k(policy: str, K: int) -> int:
    return K if PolicyKind(policy).interleaved else 1


def run_all(cfg: ExperimentConfig, jobs: int = 1, keep_tracks: bool = False) -> list[RunOutcome]:
    """Every (policy, K, seed) outcome in deterministic (policy, K, seed) order.

    K is ignored by the single-model policies, so those run once per seed and
    are reported under each requested K.
    """
    keys = sorted(RunKey(cfg.policies.index(p), K, s, p)
                  for p in dict.fromkeys(cfg.policies) for K in dict.fromkeys(cfg.K_values)
                  for s in dict.fromkeys(cfg.seeds))
    unique = sorted({(k.policy, _effective_k(k.policy, k.K), k.seed) for k in keys})
    tasks = [(cfg, p, K, s, keep_tracks) for p, K, s in unique]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_execute_packed, tasks))
    else:
        outcomes = [_execute_packed(t) for t in tasks]
    by_key = {(o.policy, o.K, o.seed): o for o in outcomes}
    out = []
    for k in keys:
        o = by_key[(k.policy, _effective_k(k.policy, k.K), k.seed)]
        out.append(dataclasses.replace(o, K=k.K))
    return out


def _fmt(v: float) -> str:
    return f"{v:.6f}"


def results_csv(outcomes: list[RunOutcome]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for o in outcomes:
        w.writerow([o.policy, o.K, o.alignment, o.seed, _fmt(o.mota), _fmt(o.idf1),
                    o.fp, o.fn, o.idsw, o.gt, _fmt(o.fps_sim)])
    return buf.getvalue()


def summarize(outcomes: list[RunOutcome]) -> list[dict]:
    """Per-(policy, K, alignment) means over seeds, in first-seen order."""
    groups: dict[tuple, list[RunOutcome]] = {}
    for o in outcomes:
        groups.setdefault((o.policy, o.K, o.alignment), []).append(o)
    rows = []
    for (policy, K, alignment), runs in groups.items():
        rows.append({
            "policy": policy, "K": K, "alignment": alignment, "n_seeds": len(runs),
            "MOTA": float(np.mean([r.mota for r in runs])),
            "IDF1": float(np.mean([r.idf1 for r in runs])),
            "FP": float(np.mean([r.fp for r in runs])),
            "FN": float(np.mean([r.fn for r in runs])),
            "IDSW": float(np.mean([r.idsw for r in runs])),
            "GT": float(np.mean([r.gt for r in runs])),
            "FPS_sim": float(np.mean([r.fps_sim for r in runs])),
        })
    return rows


def _prepare_output(out_dir: str | Path) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc.strerror}") from None
    return out


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None, *, jobs: int = 1,
                   save_tracks: bool = False) -> dict[str, Path]:
    """Run the configured grid and write ``results.csv`` and ``summary.json``.

    With ``save_tracks`` each run also leaves a MOTChallenge result file and a
    timing sidecar under ``tracks/``.
    """
    out = _prepare_output(out_dir if out_dir is not None else cfg.output)
    outcomes = run_all(cfg, jobs=jobs, keep_tracks=save_tracks)
    paths = {"csv": out / "results.csv", "summary": out / "summary.json"}
    paths["csv"].write_text(results_csv(outcomes))
    summary = {"runs": len(outcomes), "configurations": summarize(outcomes)}
    paths["summary"].write_text(json.dumps(summary, indent=2) + "\n")
    if save_tracks:
        tdir = out / "tracks"
        tdir.mkdir(exist_ok=True)
        for o in outcomes:
            stem = tdir / f"{o.policy}_K{o.K}_{o.alignment}_seed{o.seed}"
            (stem.with_name(stem.name + ".txt")).write_text(o.mot_text or "")
            (stem.with_name(stem.name + ".timing.json")).write_text(
                json.dumps(o.timing, indent=2, sort_keys=True) + "\n")
    for row in summarize(outcomes):
        log.info("%-17s K=%-2d align=%-3s MOTA=%.4f IDF1=%.4f IDSW=%.1f FPS=%.2f", row["policy"], row["K"],
                 row["alignment"], row["MOTA"], row["IDF1"], row["IDSW"], row["FPS_sim"])
    return paths


def sweep_k(cfg: ExperimentConfig, ks: list[int], out_dir: str | Path | None = None, *,
            jobs: int = 1) -> list[dict]:
    """Mean MOTA and simulated FPS per (policy, K): the accuracy/throughput frontier."""
    if not ks:
        raise ConfigError("K list: must be non-empty")
    cfg = dataclasses.replace(cfg, K_values=list(ks))
    rows = [{"policy": r["policy"], "K": r["K"], "MOTA": r["MOTA"], "FPS_sim": r["FPS_sim"]}
            for r in summarize(run_all(cfg, jobs=jobs))]
    if out_dir is not None:
        out = _prepare_output(out_dir)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([r["policy"], r["K"], _fmt(r["MOTA"]), _fmt(r["FPS_sim"])])
        (out / "sweep.csv").write_text(buf.getvalue())
    return rows


def default_jobs() -> int:
    return os.cpu_count() or 1


__all__ = [
    "ConfigError", "ExperimentConfig", "RunOutcome", "config_from_dict", "load_config", "run_all",
    "run_experiment", "sweep_k", "results_csv", "summarize", "shipped_config_path",
]
