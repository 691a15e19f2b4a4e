"""Command line entry point: simulate, train, reconstruct, evaluate.

All outputs are deterministic for fixed seeds; every failure prints a
single machine-parsable ``error[CODE]: message`` line and exits nonzero.
``DDRECON_THREADS`` caps evaluation workers (default: available CPUs).
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .autograd import Tensor
from .cascade import DualDomainCascade
from .checkpoint import load_arrays
from .config import ExperimentConfig
from .dataset import (
    read_dataset,
    read_split_manifest,
    synthesize_dataset,
    write_dataset,
    write_split_manifest,
)
from .errors import DdreconError, EmptySplitError, MissingFileError
from .fourier import DOMAIN_KSPACE, ComplexImage, ifft2c_array, pairs_to_complex
from .metrics import ReconReport, nmse, psnr, ssim
from .mri import split_dataset
from .training import SlicePack, train

LOSS_CONVENTION_NOTE = (
    "l2 loss convention: mean squared error (squared norm divided by element count)"
)


def worker_count():
    env = os.environ.get("DDRECON_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def _load_config(args):
    if args.config:
        if not os.path.exists(args.config):
            raise MissingFileError(f"config file not found: {args.config}")
        cfg = ExperimentConfig.from_file(args.config)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg.dataset_seed = args.seed
        cfg.split_seed = args.seed
        cfg.train_seed = args.seed
    return cfg


def _require(path, what):
    if not os.path.exists(path):
        raise MissingFileError(f"{what} not found: {path}")
    return path


def _load_records(path):
    return read_dataset(_require(path, "dataset"))


def _build_model(cfg, checkpoint_path):
    model = DualDomainCascade(cfg.cascade_config(), seed=cfg.train_seed)
    state = load_arrays(_require(checkpoint_path, "checkpoint"))
    model.load_state_arrays(state)
    return model


def write_pgm16(path, image, scale_max):
    """16-bit grayscale PGM, values normalized by ``scale_max``."""
    arr = np.asarray(image, dtype=np.float64)
    if scale_max <= 0:
        scale_max = 1.0
    levels = np.clip(arr / scale_max, 0.0, 1.0)
    pixels = np.round(levels * 65535.0).astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n65535\n".encode("ascii"))
        f.write(pixels.tobytes())


def read_pgm16(path):
    with open(path, "rb") as f:
        if f.readline().strip() != b"P5":
            raise MissingFileError(f"not a P5 PGM file: {path}")
        w, h = (int(v) for v in f.readline().split())
        maxval = int(f.readline())
        dtype = ">u2" if maxval > 255 else np.uint8
        data = np.frombuffer(f.read(), dtype=dtype)
    return data.reshape(h, w).astype(np.float64) / maxval


def cmd_simulate(cfg, out_dir, log):
    os.makedirs(out_dir, exist_ok=True)
    records = synthesize_dataset(
        cfg.dataset_height,
        cfg.dataset_width,
        cfg.dataset_ncoil,
        cfg.dataset_slices,
        cfg.mask_acceleration,
        cfg.mask_center_fraction,
        cfg.dataset_seed,
        n_ellipses=cfg.dataset_n_ellipses,
        noise_sigma=cfg.dataset_noise_sigma,
    )
    dataset_path = os.path.join(out_dir, cfg.paths_dataset)
    write_dataset(records, dataset_path)
    split = split_dataset([r.slice_id for r in records], cfg.split_fractions(),
                          cfg.split_seed)
    manifest_path = os.path.join(out_dir, cfg.paths_split_manifest)
    write_split_manifest(split, manifest_path)
    log(f"wrote {len(records)} slices to {dataset_path}")
    log(f"split train/val/test = {len(split.train)}/{len(split.val)}/{len(split.test)}")
    return dataset_path, manifest_path


def cmd_train(cfg, out_dir, resume, log):
    dataset_path = os.path.join(out_dir, cfg.paths_dataset)
    manifest_path = os.path.join(out_dir, cfg.paths_split_manifest)
    records = _load_records(dataset_path)
    split = read_split_manifest(_require(manifest_path, "split manifest"))
    ckpt_dir = os.path.join(out_dir, cfg.paths_checkpoint_dir)
    history_path = os.path.join(out_dir, cfg.paths_history)
    model, history = train(
        records,
        split,
        cfg.cascade_config(),
        cfg.train_config(ckpt_dir),
        resume=resume,
        history_path=history_path,
        log=log,
    )
    log(f"checkpoints in {ckpt_dir}, history in {history_path}")
    return model, history


def _forward_single(model, pack, sid):
    _, ks, _, mask = pack.batch([sid])
    out = model(ComplexImage(Tensor(ks), DOMAIN_KSPACE), mask)
    return out


def cmd_reconstruct(cfg, checkpoint_path, dataset_path, slice_ids, out_dir, log):
    records = _load_records(dataset_path)
    model = _build_model(cfg, checkpoint_path)
    pack = SlicePack(records)
    if slice_ids == ["all"]:
        slice_ids = [r.slice_id for r in records]
    os.makedirs(out_dir, exist_ok=True)
    for sid in slice_ids:
        if sid not in pack.by_id:
            raise EmptySplitError(f"slice '{sid}' not present in dataset")
        truth = pack.ground_truth(sid)
        scale_max = float(truth.max())
        out = _forward_single(model, pack, sid)
        _, ks, _, _ = pack.batch([sid])
        zf = np.sqrt((np.abs(ifft2c_array(pairs_to_complex(ks[0]))) ** 2).sum(axis=0))
        write_pgm16(os.path.join(out_dir, f"{sid}_recon.pgm"),
                    out.final_image.data[0], scale_max)
        write_pgm16(os.path.join(out_dir, f"{sid}_zerofill.pgm"), zf, scale_max)
        write_pgm16(os.path.join(out_dir, f"{sid}_truth.pgm"), truth, scale_max)
        log(f"wrote {sid} reconstruction set to {out_dir}")


def _metric_rows(sid, pred, ref):
    return (sid, nmse(pred, ref), ssim(pred, ref), psnr(pred, ref))


def evaluate_slices(model, pack, slice_ids):
    """Per-slice k-space and image metrics for the cascade and zero-fill."""

    def one(sid):
        kfull, ks, _, mask = pack.batch([sid])
        out = _forward_single(model, pack, sid)
        k_pred = pairs_to_complex(out.kspaces[-1].tensor.data[0])
        k_ref = pairs_to_complex(kfull[0])
        k_zf = pairs_to_complex(ks[0])
        truth = pack.ground_truth(sid)
        zf_img = np.sqrt((np.abs(ifft2c_array(k_zf)) ** 2).sum(axis=0))
        return {
            "kspace_cascade": _metric_rows(sid, k_pred, k_ref),
            "kspace_zerofill": _metric_rows(sid, k_zf, k_ref),
            "image_cascade": _metric_rows(sid, out.final_image.data[0], truth),
            "image_zerofill": _metric_rows(sid, zf_img, truth),
        }

    workers = min(worker_count(), len(slice_ids))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, slice_ids))
    else:
        results = [one(sid) for sid in slice_ids]
    return results


def _report_text(title, rows_by_method):
    lines = [f"# {title}", f"# {LOSS_CONVENTION_NOTE}", "# columns: NMSE% SSIM PSNR"]
    lines.append("method\tnmse_mean\tnmse_std\tssim_mean\tssim_std\tpsnr_mean\tpsnr_std")
    for method, rows in rows_by_method.items():
        agg = ReconReport(rows).aggregate()
        lines.append(
            f"{method}\t"
            f"{agg['nmse'][0]:.4g}\t{agg['nmse'][1]:.4g}\t"
            f"{agg['ssim'][0]:.4g}\t{agg['ssim'][1]:.4g}\t"
            f"{agg['psnr'][0]:.4g}\t{agg['psnr'][1]:.4g}"
        )
    for method, rows in rows_by_method.items():
        lines.append(f"# per-slice: {method}")
        lines.append("slice_id\tnmse_percent\tssim\tpsnr_db")
        for sid, n, s, p in rows:
            lines.append(f"{sid}\t{n:.6g}\t{s:.6g}\t{p:.6g}")
    return "\n".join(lines) + "\n"


def cmd_evaluate(cfg, checkpoint_path, dataset_path, manifest_path, split_name,
                 out_dir, log):
    records = _load_records(dataset_path)
    split = read_split_manifest(_require(manifest_path, "split manifest"))
    slice_ids = split.for_name(split_name)
    if not slice_ids:
        raise EmptySplitError(f"split '{split_name}' is empty")
    model = _build_model(cfg, checkpoint_path)
    pack = SlicePack(records)
    for sid in slice_ids:
        if sid not in pack.by_id:
            raise EmptySplitError(f"split references unknown slice '{sid}'")
    results = evaluate_slices(model, pack, slice_ids)

    report_dir = os.path.join(out_dir, cfg.paths_report_dir)
    os.makedirs(report_dir, exist_ok=True)
    texts = {}
    for domain in ("kspace", "image"):
        rows_by_method = {
            "zero-fill": [r[f"{domain}_zerofill"] for r in results],
            "cascade": [r[f"{domain}_cascade"] for r in results],
        }
        text = _report_text(f"{domain}-domain report ({split_name} split)",
                            rows_by_method)
        path = os.path.join(report_dir, f"{domain}_report.tsv")
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        texts[domain] = text
        log(f"wrote {path}")
    summary = {}
    for domain in ("kspace", "image"):
        for method in ("zero-fill", "cascade"):
            key = f"{domain}_{'zerofill' if method == 'zero-fill' else 'cascade'}"
            agg = ReconReport([r[key] for r in results]).aggregate()
            summary[(domain, method)] = agg
            log(
                f"{domain:6s} {method:9s} NMSE {agg['nmse'][0]:.4g}% "
                f"SSIM {agg['ssim'][0]:.4g} PSNR {agg['psnr'][0]:.4g}"
            )
    return summary


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ddrecon",
        description="Dual-domain cascade reconstruction for undersampled multi-coil MRI",
    )
    parser.add_argument("--config", metavar="PATH", help="experiment config file")
    parser.add_argument("--seed", type=int, metavar="U64",
                        help="override every configured seed")
    parser.add_argument("--out", metavar="DIR", default=".",
                        help="output directory (default: current)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", help="synthesize the phantom dataset and split")

    p_train = sub.add_parser("train", help="train the cascade on the dataset")
    p_train.add_argument("--resume", action="store_true",
                         help="continue from the latest checkpoint")

    p_rec = sub.add_parser("reconstruct", help="export reconstructions as PGM")
    p_rec.add_argument("--checkpoint", required=True)
    p_rec.add_argument("--dataset", required=True)
    p_rec.add_argument("--slices", required=True,
                       help="comma-separated slice ids, or 'all'")

    p_eval = sub.add_parser("evaluate", help="metric reports on a split")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--dataset", required=True)
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--split", default="test", choices=("train", "val", "test"))
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    def log(msg):
        print(msg)

    try:
        cfg = _load_config(args)
        if args.command == "simulate":
            cmd_simulate(cfg, args.out, log)
        elif args.command == "train":
            cmd_train(cfg, args.out, args.resume, log)
        elif args.command == "reconstruct":
            slice_ids = [s for s in args.slices.split(",") if s]
            cmd_reconstruct(cfg, args.checkpoint, args.dataset, slice_ids, args.out, log)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.checkpoint, args.dataset, args.manifest,
                         args.split, args.out, log)
    except DdreconError as exc:
        print(exc.oneline(), file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error[missing-file]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
