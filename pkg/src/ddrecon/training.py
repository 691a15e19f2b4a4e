"""Composite per-iteration loss and the deterministic training loop."""

import os
from dataclasses import dataclass, field

import numpy as np

from .autograd import Tape, Tensor, add, backward, l2_loss, scale
from .cascade import CascadeConfig, DualDomainCascade
from .checkpoint import load_arrays, save_arrays
from .errors import EmptySplitError, NonFiniteValueError, ShapeMismatchError
from .fourier import DOMAIN_KSPACE, ComplexImage, complex_to_pairs, ifft2c_array
from .metrics import nmse


@dataclass
class LossWeights:
    """Per-iteration weights for the image and k-space terms."""

    lambda_image: tuple
    lambda_kspace: tuple

    def __post_init__(self):
        self.lambda_image = tuple(float(v) for v in self.lambda_image)
        self.lambda_kspace = tuple(float(v) for v in self.lambda_kspace)
        if len(self.lambda_image) != len(self.lambda_kspace):
            raise ShapeMismatchError("loss weight lists must have equal length")
        if any(v < 0 for v in self.lambda_image + self.lambda_kspace):
            raise ShapeMismatchError("loss weights must be >= 0")
        if not any(v > 0 for v in self.lambda_image + self.lambda_kspace):
            raise ShapeMismatchError("at least one loss weight must be positive")

    @classmethod
    def default_for(cls, n_iterations):
        """0.25 for every iteration before the last, 1.0 for the last."""
        image = tuple(0.25 if m < n_iterations - 1 else 1.0 for m in range(n_iterations))
        return cls(image, image)


@dataclass
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 1e-4
    batch_size: int = 2
    seed: int = 7
    checkpoint_dir: str = "checkpoints"
    loss_weights: LossWeights = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ShapeMismatchError(
                "epochs >= 1, batch_size >= 1 and learning_rate > 0 required"
            )


def _target_array(x):
    if isinstance(x, ComplexImage):
        return x.tensor.data
    if isinstance(x, Tensor):
        return x.data
    if hasattr(x, "data") and isinstance(getattr(x, "data", None), ComplexImage):
        return x.data.tensor.data  # KSpaceVolume
    return np.asarray(x, dtype=np.float64)


def compute_loss(outputs, i_full, k_full, weights: LossWeights):
    """Weighted sum over iterations of image and k-space mean-square errors."""
    n = len(outputs.images)
    if len(weights.lambda_image) != n:
        raise ShapeMismatchError(
            f"{len(weights.lambda_image)} loss weights for {n} iterations"
        )
    i_target = _target_array(i_full)
    k_target = _target_array(k_full)
    total = None
    for m in range(n):
        for pred, target, w in (
            (outputs.images[m].tensor, i_target, weights.lambda_image[m]),
            (outputs.kspaces[m].tensor, k_target, weights.lambda_kspace[m]),
        ):
            if w == 0.0:
                continue
            term = scale(l2_loss(pred, target), w)
            total = term if total is None else add(total, term)
    return total


@dataclass
class TrainHistory:
    rows: list = field(default_factory=list)  # (epoch, train_loss, val_nmse)

    def to_text(self):
        return "".join(
            f"{epoch}\t{loss:.8e}\t{val:.8e}\n" for epoch, loss, val in self.rows
        )

    @classmethod
    def from_file(cls, path):
        hist = cls()
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                epoch, loss, val = line.split("\t")
                hist.rows.append((int(epoch), float(loss), float(val)))
        return hist


class SlicePack:
    """Precomputed per-slice tensors shared by training and evaluation."""

    def __init__(self, records):
        if not records:
            raise EmptySplitError("dataset has no slices")
        shapes = {(r.ncoil, r.height, r.width) for r in records}
        if len(shapes) != 1:
            raise ShapeMismatchError(f"mixed slice geometries in dataset: {sorted(shapes)}")
        self.by_id = {}
        for rec in records:
            kfull = complex_to_pairs(rec.kspace)
            mask = rec.mask.astype(bool)
            ks = kfull * mask[None, None, :]
            ifull = complex_to_pairs(ifft2c_array(rec.kspace))
            gt_rss = np.sqrt((np.abs(ifft2c_array(rec.kspace)) ** 2).sum(axis=0))
            self.by_id[rec.slice_id] = (kfull, ks, ifull, mask, gt_rss)

    def batch(self, slice_ids):
        packs = [self.by_id[sid] for sid in slice_ids]
        kfull = np.stack([p[0] for p in packs])
        ks = np.stack([p[1] for p in packs])
        ifull = np.stack([p[2] for p in packs])
        masks = np.stack([p[3] for p in packs])
        return kfull, ks, ifull, masks

    def ground_truth(self, slice_id):
        return self.by_id[slice_id][4]


def validation_nmse(model, pack, slice_ids, chunk=8):
    """Mean image-domain NMSE of the cascade output over the given slices."""
    values = []
    for start in range(0, len(slice_ids), chunk):
        ids = slice_ids[start:start + chunk]
        _, ks, _, masks = pack.batch(ids)
        out = model(ComplexImage(Tensor(ks), DOMAIN_KSPACE), masks)
        for i, sid in enumerate(ids):
            values.append(nmse(out.final_image.data[i], pack.ground_truth(sid)))
    return float(np.mean(values))


def _checkpoint_state(model, optimizer, epoch, best_val):
    names = [name for name, _ in model.named_parameters()]
    state = model.state_arrays()
    state.update(optimizer.state_arrays(names))
    state["meta.epoch"] = np.array([float(epoch)])
    state["meta.best_val"] = np.array([float(best_val)])
    return state


def train(records, split, cascade_config: CascadeConfig, train_config: TrainConfig,
          resume=False, history_path=None, log=None):
    """Train a cascade on the train split with per-epoch validation.

    Writes a latest and a best-validation checkpoint plus a history file.
    Fully deterministic for fixed seeds: per-epoch shuffles derive from
    (seed, epoch), so resuming from the latest checkpoint replays the
    identical remaining schedule.
    """
    from .optim import Adam

    if not split.train:
        raise EmptySplitError("training split is empty")
    if not split.val:
        raise EmptySplitError("validation split is empty")
    pack = SlicePack(records)
    for sid in split.train + split.val:
        if sid not in pack.by_id:
            raise EmptySplitError(f"split references unknown slice '{sid}'")

    os.makedirs(train_config.checkpoint_dir, exist_ok=True)
    latest_path = os.path.join(train_config.checkpoint_dir, "latest.ddrk")
    best_path = os.path.join(train_config.checkpoint_dir, "best.ddrk")
    if history_path is None:
        history_path = os.path.join(train_config.checkpoint_dir, "history.tsv")

    weights = train_config.loss_weights or LossWeights.default_for(
        cascade_config.n_iterations
    )
    model = DualDomainCascade(cascade_config, seed=train_config.seed)
    optimizer = Adam(model.parameters(), learning_rate=train_config.learning_rate)
    names = [name for name, _ in model.named_parameters()]

    history = TrainHistory()
    start_epoch = 0
    best_val = np.inf
    if resume:
        state = load_arrays(latest_path)
        model.load_state_arrays(state)
        optimizer.load_state_arrays(state, names)
        start_epoch = int(state["meta.epoch"][0]) + 1
        best_val = float(state["meta.best_val"][0])
        if os.path.exists(history_path):
            history = TrainHistory.from_file(history_path)

    for epoch in range(start_epoch, train_config.epochs):
        order = list(split.train)
        rng = np.random.default_rng(
            np.random.SeedSequence([int(train_config.seed), 7701, int(epoch)])
        )
        rng.shuffle(order)
        batch_losses = []
        for b in range(0, len(order), train_config.batch_size):
            ids = order[b:b + train_config.batch_size]
            kfull, ks, ifull, masks = pack.batch(ids)
            with Tape() as tape:
                out = model(ComplexImage(Tensor(ks), DOMAIN_KSPACE), masks)
                loss = compute_loss(out, ifull, kfull, weights)
                loss_val = loss.item()
                if not np.isfinite(loss_val):
                    raise NonFiniteValueError(
                        f"non-finite loss {loss_val} at epoch {epoch}, "
                        f"batch {b // train_config.batch_size} (slices {ids})"
                    )
                backward(loss, tape)
            optimizer.step()
            optimizer.zero_grad()
            batch_losses.append(loss_val)
        train_loss = float(np.mean(batch_losses))
        val = validation_nmse(model, pack, split.val)
        history.rows.append((epoch, train_loss, val))
        with open(history_path, "w", encoding="utf-8") as f:
            f.write(history.to_text())
        save_arrays(_checkpoint_state(model, optimizer, epoch, min(best_val, val)),
                    latest_path)
        if val < best_val:
            best_val = val
            save_arrays(_checkpoint_state(model, optimizer, epoch, best_val), best_path)
        if log:
            log(f"epoch {epoch}: train_loss {train_loss:.6g}  val_nmse {val:.6g}%")
    return model, history
