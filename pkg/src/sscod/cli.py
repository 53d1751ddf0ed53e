"""Command-line entry point for gradient checks, toy training, pair sampling
and evaluation.

Settings come from built-in defaults, then an optional flat JSON config
(``--config``), then ``--set KEY=VALUE`` and the dedicated flags. Unknown
keys are rejected. Exit status is 0 on success, 1 when the command ran but
its contract failed (gradient mismatch, diverged training) and 2 for usage,
config or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .evaluation import EvalConfig, GroundTruthBox, ImagePairCase, evaluate_cases
from .gradcheck import run_gradcheck
from .io import load_config, read_annotations, read_detection_dump, write_text
from .losses.registry import LOSS_NAMES, LossConfig
from .numerics import Rng
from .sampling import build_class_index, build_pair_list, sample_batch, sample_gt_pairs
from .training import SyntheticSpec, TrainConfig, TrainingDiverged, embedding_metrics, generate_synthetic, train

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "gradcheck": {
        "loss": "all",
        "n_instances": 20,
        "seed": 0,
        "h": 1e-5,
        "rel_tol": 1e-5,
        "n_points": 16,
        "dim": 8,
        "n_classes": 4,
        "scale": None,
        "margin": 0.5,
        "distance": "cosine",
        "corrupt_gradient": False,
    },
    "train-toy": {
        "loss": "curcon",
        "scale": None,
        "margin": 0.5,
        "distance": "cosine",
        "ema_decay": 0.99,
        "steps": 500,
        "learning_rate": 0.1,
        "log_every": 10,
        "n_classes": 3,
        "points_per_class": 20,
        "dim": 8,
        "cluster_spread": 0.3,
        "seed": 0,
    },
    "sample-pairs": {
        "algorithm": "pair_list",
        "batch_size": 16,
        "base_class": None,
        "max_retries": 100,
        "seed": 0,
    },
    "evaluate": {
        "mode": "sscod",
        "top_k": 100,
        "score_form": "weighted_cosine",
        "similarity_threshold": None,
        "iou_thresholds": [0.5, 0.6, 0.7],
        "p": 6,
        "seed": 0,
        "jobs": 1,
    },
}

SAMPLING_ALGORITHMS = ("pair_list", "class_index", "batch")
EVAL_MODES = ("sscod", "hard_match", "soft_match")


class UsageError(Exception):
    pass


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def resolve_config(command: str, args) -> dict:
    cfg = dict(DEFAULTS[command])
    sources = []
    if args.config:
        sources.append(("config file", load_config(args.config)))
    overrides = {}
    for item in args.set or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = _parse_value(value)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "loss", None) is not None:
        overrides["loss"] = args.loss
    if getattr(args, "mode", None) is not None:
        overrides["algorithm" if command == "sample-pairs" else "mode"] = args.mode
    sources.append(("override", overrides))
    for origin, values in sources:
        unknown = sorted(set(values) - set(cfg))
        if unknown:
            raise UsageError(f"unknown {origin} key(s) for {command}: {', '.join(unknown)}")
        cfg.update(values)
    return {"command": command, **cfg}


def _loss_config(cfg: dict, name: str) -> LossConfig:
    return LossConfig(
        name=name,
        scale=cfg["scale"],
        margin=cfg["margin"],
        distance=cfg["distance"],
        ema_decay=cfg.get("ema_decay", 0.99),
    )


def cmd_gradcheck(cfg: dict, out) -> int:
    names = LOSS_NAMES if cfg["loss"] == "all" else (cfg["loss"],)
    for name in names:
        if name not in LOSS_NAMES:
            raise UsageError(f"unknown loss {name!r}; expected one of {', '.join(LOSS_NAMES)} or 'all'")
    results = run_gradcheck(
        names,
        base=_loss_config(cfg, names[0]),
        n_instances=cfg["n_instances"],
        seed=cfg["seed"],
        h=cfg["h"],
        rel_tol=cfg["rel_tol"],
        n_points=cfg["n_points"],
        dim=cfg["dim"],
        n_classes=cfg["n_classes"],
        corrupt=bool(cfg["corrupt_gradient"]),
    )
    lines = ["loss\tmax_rel_error\tstatus"]
    for r in results:
        lines.append(f"{r.loss}\t{r.max_rel_error:.3e}\t{'PASS' if r.passed else 'FAIL'}")
    print("\n".join(lines))
    if out:
        write_text(out, cfg, lines)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def _fmt(v) -> str:
    return "nan" if v is None else repr(float(v))


def cmd_train_toy(cfg: dict, out) -> int:
    if not out:
        raise UsageError("train-toy requires --out for the trace file")
    spec = SyntheticSpec(cfg["n_classes"], cfg["points_per_class"], cfg["dim"], cfg["cluster_spread"], cfg["seed"])
    tcfg = TrainConfig(_loss_config(cfg, cfg["loss"]), cfg["steps"], cfg["learning_rate"], cfg["log_every"], cfg["seed"])
    X, y = generate_synthetic(spec)
    try:
        result = train(X, y, tcfg)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    lines = ["step\tloss\tt\tintra\tinter"]
    lines += [f"{r.step}\t{_fmt(r.loss)}\t{_fmt(r.t)}\t{_fmt(r.intra)}\t{_fmt(r.inter)}" for r in result.trace]
    write_text(out, cfg, lines)
    m = embedding_metrics(result.points, y)
    print(f"loss={cfg['loss']} steps={cfg['steps']} final_loss={result.trace[-1].loss if result.trace else float('nan'):.6f}")
    print(f"mean_intra_cosine={_fmt(m.mean_intra_cosine)} mean_inter_cosine={_fmt(m.mean_inter_cosine)}")
    if result.state is not None:
        print(f"t={result.state.t!r}")
    return EXIT_OK


def cmd_sample_pairs(cfg: dict, annotations, out) -> int:
    if not out:
        raise UsageError("sample-pairs requires --out")
    algorithm = cfg["algorithm"]
    if algorithm not in SAMPLING_ALGORITHMS:
        raise UsageError(f"unknown algorithm {algorithm!r}; expected one of {', '.join(SAMPLING_ALGORITHMS)}")
    dataset = read_annotations(annotations)
    if algorithm == "pair_list":
        lines = [f"{json.dumps(a)}\t{json.dumps(b)}" for a, b in build_pair_list(dataset)]
    elif algorithm == "class_index":
        index = build_class_index(dataset)
        lines = [f"{c}\t{json.dumps(ids)}" for c, ids in index.items()]
    else:
        index = build_class_index(dataset)
        if not index:
            lines = []
        else:
            batch = sample_batch(
                index, dataset, cfg["batch_size"], Rng(cfg["seed"]), cfg["base_class"], cfg["max_retries"]
            )
            lines = [f"{json.dumps(a)}\t{json.dumps(b)}" for a, b in batch]
    write_text(out, cfg, lines)
    return EXIT_OK


def cmd_evaluate(cfg: dict, dets_a_path, dets_b_path, annotations, out) -> int:
    if not out:
        raise UsageError("evaluate requires --out")
    mode = cfg["mode"]
    if mode not in EVAL_MODES:
        raise UsageError(f"unknown mode {mode!r}; expected one of {', '.join(EVAL_MODES)}")
    ecfg = EvalConfig(cfg["top_k"], 0.5, cfg["similarity_threshold"], cfg["score_form"])
    dumps_a = read_detection_dump(dets_a_path, mode)
    dumps_b = read_detection_dump(dets_b_path, mode)
    if len(dumps_a) != len(dumps_b):
        raise UsageError(f"detection files hold {len(dumps_a)} and {len(dumps_b)} images; they are paired line by line")
    images = {img.image_id: img for img in read_annotations(annotations)}
    rng = Rng(cfg["seed"])
    cases = []
    for (id_a, dets_a), (id_b, dets_b) in zip(dumps_a, dumps_b):
        for image_id in (id_a, id_b):
            if image_id not in images:
                raise UsageError(f"image_id {image_id!r} has no ground truth in {annotations}")
        if mode == "sscod" and dets_a and dets_b and dets_a[0].embedding.dim != dets_b[0].embedding.dim:
            raise UsageError(f"embedding dimension mismatch between images {id_a!r} and {id_b!r}")
        img_a, img_b = images[id_a], images[id_b]
        gt_pairs = sample_gt_pairs((img_a, img_b), cfg["p"], rng)
        cases.append(
            ImagePairCase(
                tuple(dets_a),
                tuple(dets_b),
                tuple(GroundTruthBox(a.box, a.category) for a in img_a.annotations),
                tuple(GroundTruthBox(b.box, b.category) for b in img_b.annotations),
                tuple(gt_pairs),
            )
        )
    thresholds = [float(t) for t in cfg["iou_thresholds"]]
    results = evaluate_cases(cases, mode, ecfg, thresholds, jobs=int(cfg["jobs"]))
    report = {
        "mode": mode,
        "score_form": cfg["score_form"],
        "top_k": cfg["top_k"],
        "n_image_pairs": len(cases),
        "n_gt_pairs": sum(len(c.gt_pairs) for c in cases),
        "results": [
            {
                "iou_threshold": thr,
                "recall": res.recall,
                "precision": res.precision,
                "average_precision": res.average_precision,
                "true_positives": res.n_true_positive,
                "predictions": len(res.tp_flags),
            }
            for thr, res in results.items()
        ],
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    write_text(out, cfg, text.splitlines())
    for row in report["results"]:
        print(
            f"IoU>{row['iou_threshold']}: recall={row['recall']:.4f} "
            f"precision={row['precision']:.4f} AP={row['average_precision']:.4f}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sscod", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"sscod {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, loss=False, mode=False):
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output path")
        if loss:
            p.add_argument("--loss", help=f"one of {', '.join(LOSS_NAMES)}")
        if mode:
            p.add_argument("--mode")
        return p

    common(sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients"), loss=True)
    common(sub.add_parser("train-toy", help="gradient descent on synthetic clusters"), loss=True)
    p = common(sub.add_parser("sample-pairs", help="image pair list, class index or base-class batch"), mode=True)
    p.add_argument("annotations")
    p = common(sub.add_parser("evaluate", help="common-object pair recall / precision / AP"), mode=True)
    p.add_argument("detections_a")
    p.add_argument("detections_b")
    p.add_argument("annotations")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        if args.command == "gradcheck":
            return cmd_gradcheck(cfg, args.out)
        if args.command == "train-toy":
            return cmd_train_toy(cfg, args.out)
        if args.command == "sample-pairs":
            return cmd_sample_pairs(cfg, args.annotations, args.out)
        return cmd_evaluate(cfg, args.detections_a, args.detections_b, args.annotations, args.out)
    except (UsageError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
