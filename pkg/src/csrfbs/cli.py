"""Command-line pipeline: degrade, separate, evaluate, experiment.

Every command reads a :class:`~csrfbs.config.RunConfig` (INI file plus flag
overrides) and writes only below the configured output directory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import metrics
from .background import make_background
from .config import ConfigError, RunConfig, load_config, validate
from .csr import dump_dictionary_images, save_dictionary
from .fixtures import load_fixture
from .noise import degrade, derive_radii
from .solver import SeparationProblem, save_checkpoint, separate
from .video import load_video, save_frame_png, save_video

log = logging.getLogger("csrfbs")

MANIFEST = "manifest.json"
REPORT_KEYS = ("mpsnr_f", "mssim_f", "auc_f", "mpsnr_b", "mssim_b", "measure")


class PipelineError(RuntimeError):
    pass


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _read_manifest(out: Path) -> dict:
    path = out / MANIFEST
    if not path.exists():
        raise PipelineError(f"missing {path}; run 'degrade' first")
    return json.loads(path.read_text())


# -- degrade -------------------------------------------------------------------

def cmd_degrade(cfg: RunConfig) -> Path:
    """Degrade the clean input and write the observation, noise ground truth and radii."""
    out = _out(cfg)
    files = {}
    hint = {}
    if cfg.input.startswith("fixture:"):
        fx = load_fixture(cfg.input.split(":", 1)[1])
        clean = fx.clean
        save_video(fx.foreground, out / "foreground_gt.cfbs")
        save_video(fx.background, out / "background_gt.cfbs")
        files.update(foreground_gt="foreground_gt.cfbs", background_gt="background_gt.cfbs")
        hint = {"eta_f": fx.eta_f, "n_filters": fx.n_filters, "filter_size": fx.filter_size}
    else:
        if not cfg.input:
            raise PipelineError("no input configured")
        clean = load_video(cfg.input).array
    spec = cfg.noise.spec(cfg.seed)
    deg = degrade(clean, spec)
    eps, eta_s = derive_radii(spec.sigma, spec.p_s, *clean.shape)
    for name, arr in (("clean", clean), ("observed", deg.observed), ("sparse_gt", deg.sparse),
                      ("stripe_gt", deg.stripes)):
        save_video(arr, out / f"{name}.cfbs")
        files[name] = f"{name}.cfbs"
    manifest = {
        "input": cfg.input,
        "shape": list(clean.shape),
        "seed": cfg.seed,
        "noise": asdict(spec),
        "eps": eps,
        "eta_s": eta_s,
        "hint": hint,
        "files": files,
    }
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


# -- separate ------------------------------------------------------------------

def build_problem(cfg: RunConfig, manifest: dict, observed) -> SeparationProblem:
    hint = manifest.get("hint", {})
    eta_f = cfg.problem.eta_f if cfg.problem.eta_f is not None else hint.get("eta_f")
    if eta_f is None:
        raise PipelineError("eta_f is not configured and the manifest carries no hint")
    stripe_mode = cfg.problem.stripe_mode
    if stripe_mode == "auto":
        noise = manifest["noise"]
        if noise["stripe_amp"] > 0:
            stripe_mode = "time_invariant" if noise["stripe_time_invariant"] else "time_varying"
        else:
            stripe_mode = "off"
    csr = cfg.csr.resolve(cfg.seed, hint.get("n_filters"), hint.get("filter_size"))
    return SeparationProblem(
        v=observed, eps=manifest["eps"], eta_f=eta_f, eta_s=manifest["eta_s"],
        lambda2=cfg.problem.lambda2, csr=csr,
        background=make_background(cfg.problem.background, cfg.problem.lambda_lr),
        stripe_mode=stripe_mode, ablation_no_csr=cfg.problem.ablation)


def cmd_separate(cfg: RunConfig) -> Path:
    """Run the separation on the degraded observation and write all estimates."""
    out = _out(cfg)
    manifest = _read_manifest(out)
    observed = load_video(out / manifest["files"]["observed"])
    problem = build_problem(cfg, manifest, observed)
    res = separate(problem, cfg.solver)
    for name in ("f", "b", "s", "l"):
        save_video(getattr(res, name), out / f"{name}.cfbs")
    if res.dictionary is not None:
        save_dictionary(res.dictionary, out / "dictionary.cfbd")
        dump_dictionary_images(res.dictionary, out / "dictionary")
    if cfg.save_coefficients:
        cdir = out / "coefficients"
        cdir.mkdir(exist_ok=True)
        for k in range(res.a.shape[0]):
            save_video(res.a[k], cdir / f"a_{k:03d}.cfbs")
    if cfg.checkpoint:
        save_checkpoint(out / "checkpoint", res.state, res.dictionary)
    report = res.report.to_dict()
    report["problem"] = {
        "eps": problem.eps, "eta_f": problem.eta_f, "eta_s": problem.eta_s, "lambda1": problem.lambda1,
        "lambda2": problem.lambda2, "background": problem.background.kind, "stripe_mode": problem.stripe_mode,
        "ablation_no_csr": problem.ablation_no_csr, "csr": asdict(problem.csr),
    }
    path = out / "report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path


# -- evaluate ------------------------------------------------------------------

def evaluate_arrays(f, b, f_ref, b_ref, threshold_frac: float = 0.1) -> tuple[dict, list]:
    """The six report values plus one structured record per metric and component."""
    fmap = metrics.threshold_map(f_ref, threshold_frac * float(np.abs(f_ref).max()))
    pf, cap_f = metrics.frame_psnr(f, f_ref)
    pb, cap_b = metrics.frame_psnr(b, b_ref)
    values = {
        "mpsnr_f": float(np.mean(pf)),
        "mssim_f": metrics.mssim(f, f_ref),
        "auc_f": metrics.auc(f, fmap),
        "mpsnr_b": float(np.mean(pb)),
        "mssim_b": metrics.mssim(b, b_ref),
        "measure": metrics.tuning_measure(f + b, f, b, f_ref + b_ref, f_ref, b_ref),
    }
    records = [
        {"metric": "mpsnr", "component": "f", "value": values["mpsnr_f"], "capped_frames": int(cap_f.sum())},
        {"metric": "mssim", "component": "f", "value": values["mssim_f"]},
        {"metric": "auc", "component": "f", "value": values["auc_f"]},
        {"metric": "mpsnr", "component": "b", "value": values["mpsnr_b"], "capped_frames": int(cap_b.sum())},
        {"metric": "mssim", "component": "b", "value": values["mssim_b"]},
        {"metric": "measure", "component": "u,f,b", "value": values["measure"]},
    ]
    return values, records


def cmd_evaluate(cfg: RunConfig) -> Path:
    """Compare estimates with the references and write text + JSON reports and frame dumps."""
    out = _out(cfg)
    manifest = _read_manifest(out)
    files = manifest["files"]
    if "foreground_gt" not in files or "background_gt" not in files:
        raise PipelineError("manifest has no foreground/background references")
    f = load_video(out / "f.cfbs").array
    b = load_video(out / "b.cfbs").array
    f_ref = load_video(out / files["foreground_gt"]).array
    b_ref = load_video(out / files["background_gt"]).array
    if f.shape != f_ref.shape or b.shape != b_ref.shape:
        raise PipelineError(f"estimate shape {f.shape} does not match reference {f_ref.shape}")
    values, records = evaluate_arrays(f, b, f_ref, b_ref, cfg.evaluate.threshold_frac)
    text = "".join(f"{k} = {values[k]!r}\n" for k in REPORT_KEYS)
    (out / "metrics.txt").write_text(text)
    (out / "metrics.json").write_text(json.dumps(records, indent=2) + "\n")

    n3 = f.shape[2]
    picks = cfg.evaluate.dump_frames or tuple(sorted({1, (n3 + 1) // 2, n3}))
    observed = load_video(out / files["observed"]).array
    fdir = out / "frames"
    fdir.mkdir(exist_ok=True)
    for k in picks:
        if not 1 <= k <= n3:
            raise PipelineError(f"dump frame {k} out of range 1..{n3}")
        for name, arr in (("observed", observed), ("f", np.abs(f)), ("b", b), ("f_gt", np.abs(f_ref)),
                          ("b_gt", b_ref)):
            save_frame_png(arr[:, :, k - 1], fdir / f"{name}_{k:03d}.png")
    return out / "metrics.txt"


# -- experiment ----------------------------------------------------------------

def triple_seed(master: int, fixture: str, case: int, model: str) -> int:
    h = hashlib.sha256(f"{master}:{fixture}:{case}:{model}".encode()).digest()
    return int.from_bytes(h[:4], "little")


def _run_triple(args) -> dict:
    cfg, fixture, case, model = args
    sub = replace(
        cfg,
        input=f"fixture:{fixture}",
        output=str(Path(cfg.output) / f"{fixture}_case{case}_{model}"),
        seed=triple_seed(cfg.seed, fixture, case, model),
        noise=replace(cfg.noise, case=case),
        problem=replace(cfg.problem, background=model),
    )
    cmd_degrade(sub)
    cmd_separate(sub)
    cmd_evaluate(sub)
    text = (Path(sub.output) / "metrics.txt").read_text()
    values = {k.strip(): float(v) for k, v in (line.split("=") for line in text.splitlines())}
    return {"fixture": fixture, "case": case, "model": model, **values}


def check_thresholds(rows: list, thresholds: dict) -> list:
    failures = []
    for row in rows:
        for key, limit in thresholds.items():
            kind, metric = key.split("_", 1)
            if metric not in row:
                raise PipelineError(f"threshold on unknown metric {metric!r}")
            val = row[metric]
            if (kind == "min" and not val >= limit) or (kind == "max" and not val <= limit):
                failures.append(f"{row['fixture']} case{row['case']} {row['model']}: {metric}={val!r} violates {key}={limit}")
    return failures


def cmd_experiment(cfg: RunConfig) -> tuple[Path, list]:
    """degrade -> separate -> evaluate for every (fixture, case, model) triple."""
    out = _out(cfg)
    triples = [(cfg, fx, c, m) for fx in cfg.experiment.fixtures for c in cfg.experiment.cases
               for m in cfg.experiment.backgrounds]
    workers = max(1, int(os.environ.get("CSRFBS_THREADS", "1")))
    if workers > 1 and len(triples) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_triple, triples))
    else:
        rows = [_run_triple(t) for t in triples]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["fixture", "case", "model", *REPORT_KEYS])
    for r in rows:
        writer.writerow([r["fixture"], r["case"], r["model"], *(repr(r[k]) for k in REPORT_KEYS)])
    path = out / "summary.csv"
    path.write_text(buf.getvalue())
    failures = check_thresholds(rows, cfg.experiment.thresholds)
    (out / "summary_failures.txt").write_text("".join(f + "\n" for f in failures))
    return path, failures


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="csrfbs", description="Foreground-background separation of degraded videos.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("degrade", "separate", "evaluate", "experiment"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI run configuration")
        sp.add_argument("--input", help="clean video: raw .cfbs file, image directory or fixture:NAME")
        sp.add_argument("--output", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--case", type=int, choices=(1, 2, 3))
        sp.add_argument("--background", choices=("lowrank", "static"))
        sp.add_argument("--ablation", action="store_true", help="drop the CSR terms")
        sp.add_argument("--max-outer", type=int)
        sp.add_argument("--max-inner", type=int)
        sp.add_argument("--refine-iters", type=int)
        sp.add_argument("--save-coefficients", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.input is not None:
        cfg.input = args.input
    if args.output is not None:
        cfg.output = args.output
    if args.seed is not None:
        cfg.seed = args.seed
    if args.case is not None:
        cfg.noise = replace(cfg.noise, case=args.case)
    if args.background is not None:
        cfg.problem = replace(cfg.problem, background=args.background)
        cfg.experiment = replace(cfg.experiment, backgrounds=(args.background,))
    if args.ablation:
        cfg.problem = replace(cfg.problem, ablation=True)
    if args.save_coefficients:
        cfg.save_coefficients = True
    overrides = {k: v for k, v in (("max_outer", args.max_outer), ("max_inner", args.max_inner),
                                   ("refine_iters", args.refine_iters)) if v is not None}
    if overrides:
        cfg.solver = replace(cfg.solver, **overrides)
    validate(cfg)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "degrade":
            print(cmd_degrade(cfg))
        elif args.command == "separate":
            print(cmd_separate(cfg))
        elif args.command == "evaluate":
            print(Path(cmd_evaluate(cfg)).read_text(), end="")
        else:
            path, failures = cmd_experiment(cfg)
            print(path.read_text(), end="")
            for f in failures:
                print("FAIL", f, file=sys.stderr)
            if failures:
                return 1
    except (ConfigError, PipelineError, OSError, ValueError) as exc:
        print(f"csrfbs {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
