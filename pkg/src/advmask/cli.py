"""Command-line entry point.

Every command validates its inputs, writes its outputs plus a run
manifest (command, parameters, seeds, input/output hashes, version)
sufficient to reproduce the run bit-exactly, and exits 0 on success or
a distinct nonzero code per error class.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import AttackConfig, bim, ebim, fgsm, localized_bim
from .datasets import load_dataset_dir, make_textured_dataset, save_dataset_dir
from .errors import (
    AdvmaskError,
    KappaUnreachableError,
    MapFormatError,
    PNMFormatError,
    WeightFormatError,
    ZeroMaskError,
)
from .image import (
    Image,
    l0_count,
    l2_distance,
    linf_distance,
    load_image,
    save_image,
    to_grayscale,
)
from .maps import (
    adjust_to_kappa,
    kappa,
    local_entropy,
    load_strength_map,
    map_to_pgm,
    perlin_map,
    phi,
    save_map,
)
from .model import build_model, forward, load_weights, save_weights, train
from .stats import run_hypothesis_battery, summarize
from .study import Study, TrialRecord, load_study_config

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_BAD_FORMAT = 4
EXIT_KAPPA_UNREACHABLE = 5
EXIT_ZERO_MASK = 6
EXIT_BAD_DATA = 7

DEFAULT_SEED = 1234


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(command: str, params: dict, inputs, outputs, seed=None,
                   manifest_path=None) -> None:
    """Serialize the run description beside the primary output."""
    outputs = [str(p) for p in outputs if p]
    manifest = {
        "tool": "advmask",
        "version": __version__,
        "command": command,
        "parameters": params,
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs if p},
        "outputs": {p: _sha256(p) for p in outputs},
    }
    if manifest_path is None and outputs:
        manifest_path = outputs[0] + ".manifest.json"
    if manifest_path is not None:
        Path(manifest_path).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_report(path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=2) + "\n")


def _resolve_seed(args) -> int:
    if getattr(args, "random_seed", False):
        return secrets.randbits(63)
    return args.seed


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_dataset(args) -> int:
    seed = _resolve_seed(args)
    xs, ys = make_textured_dataset(args.n_per_class, size=args.size, seed=seed)
    save_dataset_dir(xs, ys, args.out)
    print(f"wrote {len(ys)} images under {args.out}")
    write_manifest("dataset", {
        "n_per_class": args.n_per_class, "size": args.size, "out": str(args.out),
    }, inputs=[], outputs=[], seed=seed,
       manifest_path=Path(args.out) / "manifest.json")
    return EXIT_OK


def cmd_train(args) -> int:
    seed = _resolve_seed(args)
    xs, ys, class_names = load_dataset_dir(args.dataset)
    test = None
    if args.test_dataset:
        tx, ty, _ = load_dataset_dir(args.test_dataset)
        test = (tx, ty)
    h, w, c = xs.shape[1:]
    model = build_model((h, w, c), len(class_names), seed=seed)
    model = train(model, (xs, ys), epochs=args.epochs, learning_rate=args.lr,
                  seed=seed, batch_size=args.batch_size, test_dataset=test)
    save_weights(model, args.out)
    print(f"train accuracy: {model.metrics['train_accuracy']:.4f}")
    if "test_accuracy" in model.metrics:
        print(f"test accuracy:  {model.metrics['test_accuracy']:.4f}")
    write_manifest("train", {
        "dataset": str(args.dataset),
        "test_dataset": str(args.test_dataset) if args.test_dataset else None,
        "epochs": args.epochs, "lr": args.lr, "batch_size": args.batch_size,
        "classes": class_names, "metrics": model.metrics,
    }, inputs=[], outputs=[args.out], seed=seed)
    return EXIT_OK


def _attack_config(args) -> AttackConfig:
    if args.mode == "auto":
        mode = "targeted" if args.target_label is not None else "untargeted"
    else:
        mode = args.mode
    if mode == "targeted" and args.target_label is None:
        raise ValueError("targeted attack requires --target-label")
    return AttackConfig(
        mode=mode,
        target_label=args.target_label,
        certainty_threshold=args.certainty,
        stepsize=args.stepsize,
        max_iterations=args.max_iter,
        linf_budget=args.linf_budget,
    )


def cmd_attack(args) -> int:
    model = load_weights(args.weights)
    img = load_image(args.image)
    before = forward(model, img)

    if args.method == "fgsm":
        result = fgsm(model, img, args.eps)
    else:
        cfg = _attack_config(args)
        if args.method == "bim":
            result = bim(model, img, cfg)
        elif args.method == "localized":
            if not args.map:
                raise ValueError("localized attack requires --map")
            result = localized_bim(model, img, cfg, load_strength_map(args.map))
        elif args.method == "ebim":
            result = ebim(model, img, cfg, radius=args.entropy_radius,
                          bins=args.entropy_bins, threshold=args.entropy_threshold)
        else:
            raise ValueError(f"unknown method {args.method}")

    save_image(result.adversarial, args.out)
    report = {
        "method": args.method,
        "success": result.success,
        "iterations": result.iterations_used,
        "label_before": before.label,
        "certainty_before": before.certainty,
        "label_after": result.final_prediction.label,
        "certainty_after": result.final_prediction.certainty,
        "linf": result.linf,
        "l2": result.l2,
        "l0": result.l0,
        "mask_kappa": (
            kappa(result.strength_map_used)
            if result.strength_map_used is not None else None
        ),
    }
    if args.report:
        _write_report(args.report, report)
    print(json.dumps(report, indent=2))
    write_manifest("attack", {
        "method": args.method, "mode": args.mode, "target_label": args.target_label,
        "certainty": args.certainty, "stepsize": args.stepsize,
        "max_iter": args.max_iter, "linf_budget": args.linf_budget,
        "entropy_radius": args.entropy_radius, "entropy_bins": args.entropy_bins,
        "entropy_threshold": args.entropy_threshold, "eps": args.eps,
        "map": str(args.map) if args.map else None,
    }, inputs=[args.weights, args.image] + ([args.map] if args.map else []),
       outputs=[args.out] + ([args.report] if args.report else []))
    return EXIT_OK


def cmd_entropy_map(args) -> int:
    img = load_image(args.image)
    entropy = local_entropy(to_grayscale(img), radius=args.radius, bins=args.bins)
    if args.phi == "none":
        out_map = entropy
    elif args.phi == "binarize":
        out_map = phi(entropy, "binarize", threshold=args.threshold)
    else:
        out_map = phi(entropy, "normalize-gamma", gamma=args.gamma)
    save_map(out_map, args.out)
    if args.out_pgm:
        map_to_pgm(out_map, args.out_pgm)
    summary = {
        "phi": args.phi,
        "max_entropy_bits": float(entropy.data.max()),
        "kappa": float(out_map.data.mean()),
    }
    print(json.dumps(summary, indent=2))
    write_manifest("entropy-map", {
        "radius": args.radius, "bins": args.bins, "phi": args.phi,
        "threshold": args.threshold, "gamma": args.gamma,
    }, inputs=[args.image], outputs=[args.out] + ([args.out_pgm] if args.out_pgm else []))
    return EXIT_OK


def cmd_perlin(args) -> int:
    seed = _resolve_seed(args)
    noise = perlin_map(args.width, args.height, cell_size=args.cell,
                       octaves=args.octaves, seed=seed)
    if args.target_kappa is not None:
        noise = adjust_to_kappa(noise, args.target_kappa)
    save_map(noise, args.out)
    if args.out_pgm:
        map_to_pgm(noise, args.out_pgm)
    print(json.dumps({"kappa": kappa(noise)}, indent=2))
    write_manifest("perlin", {
        "width": args.width, "height": args.height, "cell": args.cell,
        "octaves": args.octaves, "target_kappa": args.target_kappa,
    }, inputs=[], outputs=[args.out] + ([args.out_pgm] if args.out_pgm else []), seed=seed)
    return EXIT_OK


def cmd_compare(args) -> int:
    a = load_image(args.original)
    b = load_image(args.modified)
    report = {
        "linf": linf_distance(a, b),
        "l2": l2_distance(a, b),
        "l0": l0_count(a, b),
    }
    if args.weights:
        model = load_weights(args.weights)
        pa, pb = forward(model, a), forward(model, b)
        report.update(
            label_before=pa.label, certainty_before=pa.certainty,
            label_after=pb.label, certainty_after=pb.certainty,
        )
    if args.out_diff:
        diff = b.data - a.data
        lo, hi = float(diff.min()), float(diff.max())
        scaled = np.zeros_like(diff) if hi - lo < 1e-15 else (diff - lo) / (hi - lo)
        save_image(Image(scaled), args.out_diff)
    _write_report(args.report, report)
    print(json.dumps(report, indent=2))
    write_manifest("compare", {
        "original": str(args.original), "modified": str(args.modified),
        "weights": str(args.weights) if args.weights else None,
    }, inputs=[args.original, args.modified] + ([args.weights] if args.weights else []),
       outputs=[args.report] + ([args.out_diff] if args.out_diff else []))
    return EXIT_OK


def cmd_stats(args) -> int:
    path = Path(args.responses)
    if not path.exists():
        raise FileNotFoundError(f"responses file not found: {path}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(TrialRecord.from_json_line(line))
    summaries = summarize(records)
    report = {
        "participants": [
            {
                "participant": s.participant,
                "mu_none": s.mu_none,
                "mu_bim": s.mu_bim,
                "mu_ebim": s.mu_ebim,
                "complete": s.complete,
            }
            for s in summaries
        ],
    }
    complete = [s for s in summaries if s.complete]
    if len(complete) >= 2:
        battery = run_hypothesis_battery(complete)
        report["battery"] = battery.to_rows()
        report["alpha"] = battery.alpha
        print(battery.format_table())
    else:
        report["battery"] = None
        report["note"] = f"battery needs >= 2 complete participants, have {len(complete)}"
        print(report["note"])
    if args.out:
        _write_report(args.out, report)
        write_manifest("stats", {"responses": str(args.responses)},
                       inputs=[args.responses], outputs=[args.out])
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = load_study_config(args.study)
    study = Study(config, args.responses)
    app = create_app(study, static_dir=args.static_dir)
    print(f"serving study with {len(config.triples)} triples "
          f"({config.trial_count} trials/session) on port {args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_prepare_study(args) -> int:
    """Attack a sample of dataset images and emit a study config."""
    seed = _resolve_seed(args)
    rng = np.random.default_rng(seed)
    model = load_weights(args.weights)
    xs, ys, _ = load_dataset_dir(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    picks = rng.permutation(len(ys))[: args.pairs]
    pairs = []
    skipped = 0
    for idx in picks:
        img = Image(xs[idx])
        before = forward(model, img)
        target = int((before.label + 1 + rng.integers(0, model.num_classes - 1))
                     % model.num_classes)
        if target == before.label:
            target = (target + 1) % model.num_classes
        cfg = AttackConfig(
            mode="targeted", target_label=target,
            certainty_threshold=args.certainty, stepsize=args.stepsize,
            max_iterations=args.max_iter,
        )
        res_bim = bim(model, img, cfg)
        try:
            res_ebim = ebim(model, img, cfg, threshold=args.entropy_threshold)
        except ZeroMaskError:
            skipped += 1
            continue
        if not (res_bim.success and res_ebim.success):
            skipped += 1
            continue
        pid = f"pair{len(pairs):04d}"
        ext = ".png" if args.png else ".pgm"
        names = {
            "original": f"{pid}_original{ext}",
            "bim": f"{pid}_bim{ext}",
            "ebim": f"{pid}_ebim{ext}",
        }
        save_image(img, out / names["original"])
        save_image(res_bim.adversarial, out / names["bim"])
        save_image(res_ebim.adversarial, out / names["ebim"])
        pairs.append({"id": pid, **names})
        if len(pairs) >= args.pairs:
            break

    config = {"display_ms": args.display_ms, "pairs": pairs}
    config_path = out / "study.json"
    config_path.write_text(json.dumps(config, indent=2) + "\n")
    print(f"wrote {len(pairs)} triples to {out} ({skipped} skipped)")
    write_manifest("prepare-study", {
        "pairs": args.pairs, "certainty": args.certainty,
        "stepsize": args.stepsize, "max_iter": args.max_iter,
        "entropy_threshold": args.entropy_threshold, "display_ms": args.display_ms,
    }, inputs=[args.weights], outputs=[str(config_path)], seed=seed)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _add_seed_flags(p):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"RNG seed (default {DEFAULT_SEED}, fixed for reproducibility)")
    p.add_argument("--random-seed", action="store_true",
                   help="seed from the OS entropy pool instead")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advmask",
        description="localized adversarial attacks and the perception-study apparatus",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dataset", help="generate the synthetic glyph dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", type=int, default=100)
    p.add_argument("--size", type=int, default=28)
    _add_seed_flags(p)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train the reference classifier")
    p.add_argument("--dataset", required=True)
    p.add_argument("--test-dataset")
    p.add_argument("--out", required=True, help="weights file to write")
    p.add_argument("--epochs", type=int, default=6)
    p.add_argument("--lr", type=float, default=0.08)
    p.add_argument("--batch-size", type=int, default=64)
    _add_seed_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="run an attack against one image")
    p.add_argument("--weights", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--method", required=True,
                   choices=["fgsm", "bim", "ebim", "localized"])
    p.add_argument("--mode", choices=["targeted", "untargeted", "auto"], default="auto")
    p.add_argument("--target-label", type=int)
    p.add_argument("--certainty", type=float, default=0.99)
    p.add_argument("--stepsize", type=float, default=0.004)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--linf-budget", type=float, default=1.0)
    p.add_argument("--eps", type=float, default=0.05, help="fgsm step size")
    p.add_argument("--entropy-radius", type=int, default=5)
    p.add_argument("--entropy-bins", type=int, default=256)
    p.add_argument("--entropy-threshold", type=float, default=4.2)
    p.add_argument("--map", help="strength map file for --method localized")
    p.add_argument("--out", required=True, help="adversarial image to write")
    p.add_argument("--report", help="JSON report path")
    _add_seed_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("entropy-map", help="compute a local-entropy (strength) map")
    p.add_argument("--image", required=True)
    p.add_argument("--radius", type=int, default=5)
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("--phi", choices=["none", "binarize", "normalize-gamma"],
                   default="none")
    p.add_argument("--threshold", type=float, default=4.2)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--out", required=True, help="EMAP file to write")
    p.add_argument("--out-pgm", help="optional PGM visualization")
    p.set_defaults(func=cmd_entropy_map)

    p = sub.add_parser("perlin", help="generate a Perlin-noise strength map")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--cell", type=float, default=8.0)
    p.add_argument("--octaves", type=int, default=2)
    p.add_argument("--target-kappa", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--out-pgm")
    _add_seed_flags(p)
    p.set_defaults(func=cmd_perlin)

    p = sub.add_parser("compare", help="compare an original and a modified image")
    p.add_argument("--original", required=True)
    p.add_argument("--modified", required=True)
    p.add_argument("--weights", help="optional model for certainty before/after")
    p.add_argument("--report", required=True)
    p.add_argument("--out-diff", help="contrast-maximized difference image")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stats", help="aggregate a response log and run the battery")
    p.add_argument("--responses", required=True)
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="serve the pair-comparison study")
    p.add_argument("--study", required=True, help="study config JSON")
    p.add_argument("--responses", required=True, help="JSONL response log (append)")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static-dir", help="optional directory of UI files to serve at /")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("prepare-study",
                       help="attack dataset images and emit a study config")
    p.add_argument("--weights", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, default=4)
    p.add_argument("--certainty", type=float, default=0.99)
    p.add_argument("--stepsize", type=float, default=0.004)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--entropy-threshold", type=float, default=4.2)
    p.add_argument("--display-ms", type=int, default=5000)
    p.add_argument("--png", action="store_true",
                   help="write PNG stimuli (browser-friendly) instead of PGM")
    _add_seed_flags(p)
    p.set_defaults(func=cmd_prepare_study)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except (PNMFormatError, WeightFormatError, MapFormatError) as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_BAD_FORMAT
    except KappaUnreachableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_KAPPA_UNREACHABLE
    except ZeroMaskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ZERO_MASK
    except (ValueError, AdvmaskError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_DATA


if __name__ == "__main__":
    sys.exit(main())
