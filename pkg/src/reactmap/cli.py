"""Command-line pipeline: synth -> embed-learn -> reactivate -> eval.

Config precedence for every tunable is command-line flag, then manifest
entry, then built-in default. All runs are deterministic given the same
inputs, flags, and seeds.
"""

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from reactmap import dumpio, metrics
from reactmap.cam import class_scores, top_k_classes
from reactmap.context import init_store, embedding_pass, read_store, write_store
from reactmap.em import EmConfig
from reactmap.fixtures import FixtureSpec, generate
from reactmap.localization import extract_box
from reactmap.maps import min_max_normalize
from reactmap.metrics import EvalReport, GroundTruth
from reactmap.pipeline import reactivate_image

DEFAULTS = {
    "sigma": 8.0,
    "iters": 2,
    "lambda": 0.8,
    "delta_frac": 0.2,
    "tau": 0.2,
    "tau_grid": metrics.default_tau_grid(),
    "box_mode": "largest_cc",
    "class_policy": "gt",
    "upsample": "nearest",
    "jobs": 1,
    "seed": 7,
    "epochs": 1,
    "stride": 1,
    "a_init": 0.5,
}


def parse_tau_grid(text):
    """Either comma-separated values or start:stop:step."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        n = int(round((stop - start) / step))
        taus = [round(start + i * step, 10) for i in range(n + 1)]
    else:
        taus = [float(x) for x in text.split(",")]
    return metrics.validate_tau_grid(taus)


class _Config:
    """flag > manifest > default lookup."""

    def __init__(self, args, manifest):
        self.args = vars(args)
        self.manifest = manifest or {}

    def get(self, key):
        flag = self.args.get(key.replace("-", "_"))
        if flag is not None:
            return flag
        if key in self.manifest and self.manifest[key] is not None:
            return self.manifest[key]
        return DEFAULTS[key]

    def path(self, key):
        flag = self.args.get(key.replace("-", "_"))
        if flag is not None:
            return flag
        if key in self.manifest and self.manifest[key] is not None:
            return self.manifest[key]
        raise ValueError(f"missing required input {key!r} (flag or manifest)")


def _load_manifest(args):
    if getattr(args, "manifest", None):
        return dumpio.load_manifest(args.manifest)
    return {}


def _em_config(cfg):
    return EmConfig(
        sigma=float(cfg.get("sigma")),
        iterations=int(cfg.get("iters")),
        a_init=float(cfg.get("a_init")),
    )


def _dump_samples(dump):
    return [(rec.features.astype(np.float64), rec.label) for rec in dump.records]


def _ground_truths(dump):
    return [
        GroundTruth(
            image_id=rec.image_id,
            class_label=rec.label,
            boxes=rec.boxes,
            mask=rec.mask,
        )
        for rec in dump.records
    ]


def _reactivated_maps(dump, head, store, cfg):
    em_cfg = _em_config(cfg)
    delta_frac = float(cfg.get("delta_frac"))
    policy = cfg.get("class_policy")
    if policy not in ("gt", "top1"):
        raise ValueError(f"unknown class policy {policy!r}")

    def one(rec):
        if policy == "gt":
            c = rec.label
        elif rec.predictions:
            c = rec.predictions[0]
        else:
            c = top_k_classes(class_scores(rec.features.astype(np.float64), head), 1)[0]
        res = reactivate_image(
            rec.features.astype(np.float64), head, store, c, em_cfg, delta_frac
        )
        return rec.image_id, res.final

    jobs = int(cfg.get("jobs"))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, dump.records))
    return [one(rec) for rec in dump.records]


def cmd_synth(args):
    cfg = _Config(args, {})
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = FixtureSpec(
        num_classes=args.classes,
        dim=args.dim,
        height=args.height,
        width=args.width,
        part_frac=args.part_frac,
        noise=args.noise,
        seed=int(cfg.get("seed")),
    )
    fixtures, head = generate(spec, args.count)
    dump = dumpio.FeatureDump(
        num_classes=spec.num_classes, dim=spec.dim, height=spec.height, width=spec.width
    )
    for fx in fixtures:
        dump.records.append(
            dumpio.ImageRecord(
                image_id=fx.image_id,
                label=fx.label,
                features=fx.features.astype(np.float32),
                boxes=(fx.gt_box,),
                mask=fx.gt_mask,
                predictions=fx.predictions,
            )
        )
    dump_path = out_dir / "features.crmf"
    head_path = out_dir / "head.crmh"
    manifest_path = out_dir / "manifest.json"
    dumpio.write_dump(dump_path, dump)
    dumpio.write_head(head_path, head)
    manifest = {
        "feature_dump": "features.crmf",
        "head": "head.crmh",
        "resolution": spec.width,
        "stride": 1,
        "seed": int(cfg.get("seed")),
    }
    import json

    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return [dump_path, head_path, manifest_path]


def cmd_embed_learn(args):
    manifest = _load_manifest(args)
    cfg = _Config(args, manifest)
    dump = dumpio.read_dump(cfg.path("feature_dump"))
    head = dumpio.read_head(cfg.path("head"))
    store = init_store(
        dump.num_classes, dump.dim, seed=int(cfg.get("seed")), lam=float(cfg.get("lambda"))
    )
    store = embedding_pass(
        store,
        head,
        _dump_samples(dump),
        delta_frac=float(cfg.get("delta_frac")),
        epochs=int(cfg.get("epochs")),
    )
    write_store(args.out, store)
    return [Path(args.out)]


def cmd_reactivate(args):
    manifest = _load_manifest(args)
    cfg = _Config(args, manifest)
    dump = dumpio.read_dump(cfg.path("feature_dump"))
    head = dumpio.read_head(cfg.path("head"))
    store = read_store(cfg.path("store"))
    named = _reactivated_maps(dump, head, store, cfg)
    dumpio.write_maps(args.out, named)
    return [Path(args.out)]


def cmd_eval(args):
    manifest = _load_manifest(args)
    cfg = _Config(args, manifest)
    dump = dumpio.read_dump(cfg.path("feature_dump"))
    named = dumpio.read_maps(args.maps)
    by_id = dict(named)
    gts = _ground_truths(dump)
    maps = []
    for gt in gts:
        if gt.image_id not in by_id:
            raise ValueError(f"missing map for image {gt.image_id}")
        maps.append(by_id[gt.image_id])
    tau = float(cfg.get("tau"))
    taus = cfg.get("tau_grid")
    stride = int(cfg.get("stride"))
    box_mode = cfg.get("box_mode")

    report = EvalReport()
    report.scalars["num_images"] = len(maps)
    report.scalars["tau"] = tau
    boxed = [i for i, gt in enumerate(gts) if gt.boxes]
    if boxed:
        bmaps = [maps[i] for i in boxed]
        bgts = [gts[i] for i in boxed]
        report.scalars["gt_known"] = metrics.gt_known(
            bmaps, bgts, tau=tau, stride=stride, box_mode=box_mode
        )
        report.scalars["max_box_acc_v2"] = metrics.max_box_acc_v2(
            bmaps, bgts, taus=taus, stride=stride, box_mode=box_mode
        )
        preds = [dump.records[i].predictions for i in boxed]
        if all(p is not None for p in preds):
            for k in (1, 5):
                if all(len(p) >= k for p in preds):
                    report.scalars[f"top{k}_loc"] = metrics.topk_loc(
                        bmaps, bgts, preds, k, tau=tau, stride=stride, box_mode=box_mode
                    )
        report.curves["box_acc_delta0.5"] = metrics.box_acc_curve(
            bmaps, bgts, taus, delta=0.5, stride=stride, box_mode=box_mode
        )
    masked = [i for i, gt in enumerate(gts) if gt.mask is not None]
    if masked:
        report.scalars["px_ap"] = metrics.px_ap(
            [maps[i] for i in masked],
            [gts[i] for i in masked],
            upsample=cfg.get("upsample"),
        )
    metrics.write_report(args.report, report)
    outputs = [Path(args.report)]
    if args.curve:
        metrics.write_curve(args.curve, report.curves.get("box_acc_delta0.5", []))
        outputs.append(Path(args.curve))
    return outputs


def cmd_pseudo_boxes(args):
    manifest = _load_manifest(args)
    cfg = _Config(args, manifest)
    dump = dumpio.read_dump(cfg.path("feature_dump"))
    head = dumpio.read_head(cfg.path("head"))
    store = read_store(cfg.path("store"))
    named = _reactivated_maps(dump, head, store, cfg)
    tau = float(cfg.get("tau"))
    stride = int(cfg.get("stride"))
    box_mode = cfg.get("box_mode")
    lines = []
    for image_id, m in named:
        box = extract_box(min_max_normalize(m), tau, box_mode=box_mode)
        if box is None:
            continue
        if stride != 1:
            box = box.scaled(stride)
        lines.append(f"{image_id} {box.x0} {box.y0} {box.x1} {box.y1}")
    Path(args.out).write_text("\n".join(lines) + ("\n" if lines else ""))
    return [Path(args.out)]


def cmd_export_heatmap(args):
    named = dumpio.read_maps(args.maps)
    by_id = dict(named)
    if args.image_id not in by_id:
        raise ValueError(f"image {args.image_id} not in map set")
    metrics.write_pgm(args.out, by_id[args.image_id])
    return [Path(args.out)]


def _add_common(p, *names):
    if "manifest" in names:
        p.add_argument("--manifest", help="JSON manifest with paths and config overrides")
    if "dump" in names:
        p.add_argument("--dump", dest="feature_dump", help="feature dump file")
    if "head" in names:
        p.add_argument("--head", help="classifier head file")
    if "store" in names:
        p.add_argument("--store", help="context store file")
    if "em" in names:
        p.add_argument("--sigma", type=float)
        p.add_argument("--iters", type=int)
        p.add_argument("--delta-frac", type=float)
        p.add_argument("--class-policy", choices=["gt", "top1"])
        p.add_argument("--jobs", type=int)
    if "boxes" in names:
        p.add_argument("--tau", type=float)
        p.add_argument("--box-mode", choices=["largest_cc", "union"])
        p.add_argument("--stride", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="reactmap")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic fixture dump")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--height", type=int, default=28)
    p.add_argument("--width", type=int, default=28)
    p.add_argument("--part-frac", type=float, default=0.25)
    p.add_argument("--noise", type=float, default=FixtureSpec.noise)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("embed-learn", help="learn context embeddings from a dump")
    _add_common(p, "manifest", "dump", "head")
    p.add_argument("--out", required=True, help="output context store file")
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--delta-frac", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_embed_learn)

    p = sub.add_parser("reactivate", help="write final localization maps")
    _add_common(p, "manifest", "dump", "head", "store", "em")
    p.add_argument("--out", required=True, help="output map-set file")
    p.set_defaults(func=cmd_reactivate)

    p = sub.add_parser("eval", help="score maps against ground truth")
    _add_common(p, "manifest", "dump", "boxes")
    p.add_argument("--maps", required=True, help="map-set file from reactivate")
    p.add_argument("--report", required=True, help="output key=value report")
    p.add_argument("--curve", help="optional per-threshold accuracy curve file")
    p.add_argument("--tau-grid", type=parse_tau_grid)
    p.add_argument("--upsample", choices=["nearest", "bilinear"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pseudo-boxes", help="emit one pseudo box per image")
    _add_common(p, "manifest", "dump", "head", "store", "em", "boxes")
    p.add_argument("--out", required=True, help="output box list file")
    p.set_defaults(func=cmd_pseudo_boxes)

    p = sub.add_parser("export-heatmap", help="render one map as a P5 graymap")
    p.add_argument("--maps", required=True)
    p.add_argument("--image-id", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_heatmap)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "lambda_"):
        setattr(args, "lambda", args.lambda_)
    outputs = []
    try:
        outputs = args.func(args)
        return 0
    except Exception as exc:  # single-line machine-parseable failure
        for path in outputs:
            Path(path).unlink(missing_ok=True)
        for attr in ("out", "report", "curve"):
            target = getattr(args, attr, None)
            if target and Path(target).is_file():
                Path(target).unlink()
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
