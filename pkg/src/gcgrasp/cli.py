"""Command-line pipeline: part modeling, contact transfer, pose synthesis
and evaluation as file-based stages.

Each command reads a JSON config naming the input files and parameters,
writes its artifacts into the output directory, and leaves a diagnostic
OBJ next to every JSON so results can be eyeballed in any mesh viewer.
Stages communicate only through files, so a stage can be rerun, swapped
(``--baseline=preg``) or inspected in isolation. All artifacts are
deterministic for a fixed config and seed; reruns are byte-identical.

Exit codes: 0 success, 1 method failure (the pipeline could not produce a
result), 2 invalid input or config.
"""

from __future__ import annotations

import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import click
import numpy as np

from . import gc as gcmod
from .contact import (export_contact_obj, extract_contact_map, lift_to_gc,
                      save_contact_map)
from .errors import InputError, MethodError
from .hand import default_template, load_pose, load_template, pose_hand, save_pose
from .mesh import load_mesh, save_obj
from .metrics import CSV_HEADER, compute_metrics, save_metrics
from .optim import OptimizerConfig, optimize_pose, save_report
from .sdf import build_sdf, load_gsdf, save_gsdf
from .transfer import (load_transfer_result, save_transfer_result,
                       transfer_contact, transfer_preg_baseline)

GC_DEFAULTS = {"n": 30, "M": 64, "smoothing_weight": 0.5,
               "concavity_threshold": 0.15}
CONTACT_DEFAULTS = {"n_samples": 5000, "tau_c": 0.2}
TRANSFER_DEFAULTS = {"phi_offset": 0.0, "baseline_samples": 2000}
METRICS_DEFAULTS = {"n_samples": 5000, "tau_c": 0.2, "pv_resolution": 128}
SDF_DEFAULTS = {"resolution": 128}


class PipelineConfig:
    """Validated view of a pipeline config file.

    Relative paths inside the file resolve against the file's directory,
    so a config can travel with its fixtures.
    """

    def __init__(self, data, base_dir=".", out_override=None,
                 seed_override=None):
        if not isinstance(data, dict):
            raise InputError("config must be a JSON object")
        self.data = data
        self.base = base_dir
        self.seed = int(seed_override if seed_override is not None
                        else data.get("seed", 0))
        out = out_override or data.get("out", "out")
        self.out = out if out_override else self._resolve(out)
        self.gc = {**GC_DEFAULTS, **data.get("gc", {})}
        if self.gc["n"] < 3:
            raise InputError("config: gc.n must be at least 3")
        self.contact = {**CONTACT_DEFAULTS, **data.get("contact", {})}
        self.transfer = {**TRANSFER_DEFAULTS, **data.get("transfer", {})}
        self.metrics = {**METRICS_DEFAULTS, **data.get("metrics", {})}
        self.sdf = {**SDF_DEFAULTS, **data.get("sdf", {})}
        self.optimizer = OptimizerConfig.from_json(data.get("optimizer", {}))

    @classmethod
    def from_file(cls, path, out_override=None, seed_override=None):
        _require_file(path, "config file")
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as e:
                raise InputError(f"config {path} is not valid JSON: {e}")
        base = os.path.dirname(os.path.abspath(path))
        return cls(data, base_dir=base, out_override=out_override,
                   seed_override=seed_override)

    def _resolve(self, path):
        return path if os.path.isabs(path) else os.path.join(self.base, path)

    def side(self, name):
        if name not in self.data:
            raise InputError(f"config has no {name!r} section")
        return self.data[name]

    def path(self, section, key, what, required=True):
        entry = section.get(key)
        if entry is None:
            if required:
                raise InputError(f"config is missing {key!r}")
            return None
        p = self._resolve(str(entry))
        _require_file(p, what)
        return p

    def load_part(self, side_name):
        """The object mesh and the part submesh for one side."""
        side = self.side(side_name)
        obj_path = self.path(side, "object", f"{side_name} object mesh")
        obj = load_mesh(obj_path)
        faces_path = self.path(side, "part_faces",
                               f"{side_name} part face list", required=False)
        if faces_path is None:
            return obj, obj
        face_ids = _read_face_list(faces_path)
        if face_ids.max() >= obj.num_faces:
            raise InputError(
                f"{faces_path}: face index {face_ids.max()} out of range "
                f"(object has {obj.num_faces} faces)")
        return obj, obj.submesh(face_ids)

    def load_skeleton(self, side_name):
        side = self.side(side_name)
        p = self.path(side, "skeleton", f"{side_name} skeleton")
        return gcmod.load_skeleton(p)

    def load_template(self):
        entry = self.data.get("hand_template")
        if entry is None:
            return default_template()
        p = self._resolve(str(entry))
        _require_file(p, "hand template")
        return load_template(p)

    def load_source_pose(self):
        side = self.side("source")
        p = self.path(side, "hand_pose", "source hand pose")
        return load_pose(p)


def _require_file(path, what):
    if not os.path.isfile(path):
        raise InputError(f"{what} not found: {path}")


def _read_face_list(path):
    ids = []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            try:
                ids.append(int(s))
            except ValueError:
                raise InputError(f"{path}:{ln}: not a face index: {s!r}")
    if not ids:
        raise InputError(f"part file {path} lists no faces")
    return np.asarray(ids, dtype=np.int64)


def _ensure_out(cfg, baseline=None):
    out = cfg.out if not baseline else os.path.join(cfg.out, baseline)
    os.makedirs(out, exist_ok=True)
    return out


def _face_region_names(template):
    return [template.region_names[i] for i in template.face_region]


# ---------------------------------------------------------------------------
# stages (shared between single commands and batch)

def stage_gc_build(cfg, out):
    built = {}
    for side in ("source", "target"):
        if side not in cfg.data:
            continue
        _, part = cfg.load_part(side)
        skeleton = cfg.load_skeleton(side)
        g = gcmod.build_gc(part, skeleton, n=cfg.gc["n"], M=cfg.gc["M"],
                           smoothing_weight=cfg.gc["smoothing_weight"],
                           concavity_threshold=cfg.gc["concavity_threshold"])
        gcmod.save_gc(g, os.path.join(out, f"gc_{side}.json"))
        gcmod.export_surface_obj(g, os.path.join(out, f"gc_{side}_surface.obj"))
        built[side] = g
        click.echo(f"gc-build {side}: {g.n} sections, height {g.H:.2f} cm"
                   + (f", warnings {sorted(g.warnings)}" if g.warnings else ""))
    if not built:
        raise InputError("config names neither a source nor a target part")
    return built


def _load_stage_gc(out, side):
    path = os.path.join(out, f"gc_{side}.json")
    if not os.path.isfile(path):
        raise InputError(f"missing GC artifact {path}; run gc-build first")
    return gcmod.load_gc(path)


def stage_transfer(cfg, out, baseline=None):
    template = cfg.load_template()
    pose = cfg.load_source_pose()
    src_object, src_part = cfg.load_part("source")
    hand_mesh = pose_hand(template, pose).mesh
    regions = _face_region_names(template)

    t0 = time.perf_counter()
    cmap = extract_contact_map(src_object, hand_mesh, regions,
                               n_samples=cfg.contact["n_samples"],
                               tau_c=cfg.contact["tau_c"], seed=cfg.seed)
    if baseline == "preg":
        _, tgt_part = cfg.load_part("target")
        result = transfer_preg_baseline(
            cmap, src_part, tgt_part,
            n_surface_samples=cfg.transfer["baseline_samples"],
            seed=cfg.seed)
        source_map = cmap
    else:
        src_gc = _load_stage_gc(cfg.out, "source")
        tgt_gc = _load_stage_gc(cfg.out, "target")
        source_map = lift_to_gc(cmap, src_gc, src_part)
        result = transfer_contact(source_map, src_gc, tgt_gc,
                                  phi_offset=cfg.transfer["phi_offset"])
    elapsed = time.perf_counter() - t0

    save_contact_map(source_map, os.path.join(out, "contact_source.json"))
    export_contact_obj(source_map, os.path.join(out, "contact_source.obj"))
    save_transfer_result(result, os.path.join(out, "transfer_target.json"))
    export_contact_obj(result.target_map,
                       os.path.join(out, "contact_target.obj"))
    click.echo(
        f"transfer[{result.method}]: {len(result.target_map)} contacts in "
        f"{elapsed:.2f} s, delta_H {result.delta_H:+.3f} cm, "
        f"clamped {result.clamped_count}, fallbacks {result.fallback_count}")
    for w in result.warnings:
        click.echo(f"  warning: {w}")
    return result


def _stage_sdf(cfg, out):
    """Target-object SDF: configured file, cached artifact, or fresh build."""
    if "path" in cfg.sdf:
        p = cfg._resolve(str(cfg.sdf["path"]))
        _require_file(p, "SDF grid")
        return load_gsdf(p)
    cached = os.path.join(cfg.out, "target.gsdf")
    if not os.path.isfile(cached):
        tgt_object, _ = cfg.load_part("target")
        save_gsdf(build_sdf(tgt_object, resolution=cfg.sdf["resolution"]),
                  cached)
    # always read back: the file stores float32 values, and reruns must see
    # the same grid whether it was just built or already cached
    return load_gsdf(cached)


def stage_optimize(cfg, out, baseline=None):
    path = os.path.join(out, "transfer_target.json")
    if not os.path.isfile(path):
        raise InputError(f"missing transfer artifact {path}; "
                         "run transfer first")
    target_map = load_transfer_result(path).target_map
    template = cfg.load_template()
    init_pose = cfg.load_source_pose()
    grid = _stage_sdf(cfg, out)

    best_pose, report = optimize_pose(template, target_map, grid,
                                      init_pose=init_pose,
                                      config=cfg.optimizer)
    save_pose(best_pose, os.path.join(out, "pose.json"))
    save_report(report, os.path.join(out, "loss_report.json"))
    posed = pose_hand(template, best_pose)
    save_obj(posed.mesh, os.path.join(out, "hand_posed.obj"))
    click.echo(f"optimize: best total {report.best_total:.4f} at iteration "
               f"{report.best_iteration} of {report.config.iterations}"
               + (" (converged)" if report.converged else ""))
    return best_pose, report


def stage_metrics(cfg, out, pair_id="pair", baseline=None):
    pose_path = os.path.join(out, "pose.json")
    if not os.path.isfile(pose_path):
        raise InputError(f"missing pose artifact {pose_path}; "
                         "run optimize first")
    template = cfg.load_template()
    pose = load_pose(pose_path)
    posed = pose_hand(template, pose)
    tgt_object, _ = cfg.load_part("target")
    grid = _stage_sdf(cfg, out)
    report = compute_metrics(
        tgt_object, posed.mesh, posed.fingertips, object_sdf=grid,
        n_samples=cfg.metrics["n_samples"], tau_c=cfg.metrics["tau_c"],
        pv_resolution=cfg.metrics["pv_resolution"], seed=cfg.seed)
    save_metrics(report, os.path.join(out, "metrics.json"))
    with open(os.path.join(out, "metrics.csv"), "w") as fh:
        fh.write(CSV_HEADER + "\n")
        fh.write(report.csv_row(pair_id) + "\n")
    click.echo(f"metrics: pd {report.pd:.4f} cm, pv {report.pv:.4f} cm3, "
               f"cr {report.cr:.2f} %, dd {report.dd:.4f} cm")
    return report


def run_pipeline(cfg, out, baseline=None, pair_id="pair"):
    """All four stages in order, writing into one directory.

    The registration baseline never touches GC artifacts, so that stage
    is skipped when a baseline is selected.
    """
    if not baseline:
        stage_gc_build(cfg, out)
    stage_transfer(cfg, out, baseline=baseline)
    stage_optimize(cfg, out, baseline=baseline)
    return stage_metrics(cfg, out, pair_id=pair_id, baseline=baseline)


# ---------------------------------------------------------------------------
# commands

@click.group(name="gcgrasp")
def cli():
    """Part-level grasp transfer: generalized-cylinder modeling, contact
    transfer, pose optimization and metrics."""


def _config_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(), help="pipeline config JSON")(fn)
    fn = click.option("--out", "out_dir", default=None,
                      help="output directory (overrides config)")(fn)
    fn = click.option("--seed", default=None, type=int,
                      help="RNG seed (overrides config)")(fn)
    return fn


def _baseline_option(fn):
    return click.option("--baseline", type=click.Choice(["preg"]),
                        default=None,
                        help="use the rigid-registration baseline")(fn)


@cli.command("gc-build")
@_config_options
def cmd_gc_build(config_path, out_dir, seed):
    cfg = PipelineConfig.from_file(config_path, out_dir, seed)
    stage_gc_build(cfg, _ensure_out(cfg))


@cli.command("transfer")
@_config_options
@_baseline_option
def cmd_transfer(config_path, out_dir, seed, baseline):
    cfg = PipelineConfig.from_file(config_path, out_dir, seed)
    stage_transfer(cfg, _ensure_out(cfg, baseline), baseline=baseline)


@cli.command("optimize")
@_config_options
@_baseline_option
def cmd_optimize(config_path, out_dir, seed, baseline):
    cfg = PipelineConfig.from_file(config_path, out_dir, seed)
    stage_optimize(cfg, _ensure_out(cfg, baseline), baseline=baseline)


@cli.command("metrics")
@_config_options
@_baseline_option
def cmd_metrics(config_path, out_dir, seed, baseline):
    cfg = PipelineConfig.from_file(config_path, out_dir, seed)
    stage_metrics(cfg, _ensure_out(cfg, baseline), baseline=baseline)


@cli.command("batch")
@_config_options
@_baseline_option
def cmd_batch(config_path, out_dir, seed, baseline):
    """Run the full pipeline for every pair in a manifest (a JSON array of
    configs) and write one aggregate CSV. Per-pair failures are recorded
    and the batch keeps going."""
    _require_file(config_path, "manifest")
    with open(config_path) as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as e:
            raise InputError(f"manifest {config_path} is not valid JSON: {e}")
    if not isinstance(manifest, list) or not manifest:
        raise InputError("manifest must be a non-empty JSON array")
    base = os.path.dirname(os.path.abspath(config_path))
    root_out = out_dir or os.path.join(base, "out")
    os.makedirs(root_out, exist_ok=True)

    jobs = []
    for i, entry in enumerate(manifest):
        if not isinstance(entry, dict):
            raise InputError(f"manifest entry {i} must be an object")
        pair_id = str(entry.get("id", f"pair{i}"))
        jobs.append((pair_id, entry))

    def run_one(pair_id, entry):
        if "config" in entry and isinstance(entry["config"], str):
            cfg_path = entry["config"]
            if not os.path.isabs(cfg_path):
                cfg_path = os.path.join(base, cfg_path)
            cfg = PipelineConfig.from_file(
                cfg_path, os.path.join(root_out, pair_id), seed)
        else:
            data = entry.get("config", entry)
            cfg = PipelineConfig(data, base_dir=base,
                                 out_override=os.path.join(root_out, pair_id),
                                 seed_override=seed)
        out = _ensure_out(cfg, baseline)
        return run_pipeline(cfg, out, baseline=baseline, pair_id=pair_id)

    workers = max(1, int(os.environ.get("GCGRASP_THREADS", "1")))
    results = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [(pair_id, pool.submit(run_one, pair_id, entry))
                   for pair_id, entry in jobs]
        for pair_id, fut in futures:
            try:
                results.append((pair_id, fut.result(), None))
            except (InputError, MethodError, OSError) as e:
                results.append((pair_id, None, e))
                click.echo(f"{pair_id}: failed: {e}", err=True)

    rows = [CSV_HEADER]
    ok = []
    for pair_id, rep, err in results:
        if rep is not None:
            rows.append(rep.csv_row(pair_id))
            ok.append(rep)
        else:
            msg = str(err).replace(",", ";").replace("\n", " ")
            rows.append(f"{pair_id},,,,,failed: {msg}")
    if ok:
        rows.append("mean,{:.6g},{:.6g},{:.6g},{:.6g},".format(
            float(np.mean([r.pd for r in ok])),
            float(np.mean([r.pv for r in ok])),
            float(np.mean([r.cr for r in ok])),
            float(np.mean([r.dd for r in ok]))))
    csv_path = os.path.join(root_out, "batch_metrics.csv")
    with open(csv_path, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    click.echo(f"batch: {len(ok)}/{len(jobs)} pairs succeeded -> {csv_path}")


def main():
    try:
        cli.main(standalone_mode=False)
    except click.exceptions.Exit as e:
        sys.exit(e.exit_code)
    except click.ClickException as e:
        e.show()
        sys.exit(2)
    except click.Abort:
        sys.exit(2)
    except InputError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    except MethodError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    except FileNotFoundError as e:
        click.echo(f"error: file not found: {e.filename or e}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
