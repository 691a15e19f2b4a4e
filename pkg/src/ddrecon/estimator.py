"""Scikit-learn style front end for the dual-domain cascade.

``fit`` consumes fully sampled volumes paired with the masks that will
undersample them; ``predict`` reconstructs magnitude images from masked
volumes. Hyperparameters follow the sklearn convention so the estimator
works with ``clone``, ``get_params`` and grid search.
"""

import numpy as np
from sklearn.base import BaseEstimator

from .cascade import CascadeConfig, DCConfig
from .dataset import SliceRecord
from .errors import ShapeMismatchError
from .metrics import nmse
from .mri import DatasetSplit, apply_mask
from .senet import SENetConfig
from .training import LossWeights, TrainConfig, train
from .validation import check_volume_mask_pairs


class CascadeReconstructor(BaseEstimator):
    """Trainable undersampled-MRI reconstructor with a fit/predict API."""

    def __init__(self, n_iterations=2, cross_iteration_residual=True, dc_lambda=0.05,
                 depth=3, base_width=32, reduction_ratio=8, epochs=50,
                 learning_rate=1e-4, batch_size=2, image_loss_weights=None,
                 kspace_loss_weights=None, seed=0, checkpoint_dir=None):
        self.n_iterations = n_iterations
        self.cross_iteration_residual = cross_iteration_residual
        self.dc_lambda = dc_lambda
        self.depth = depth
        self.base_width = base_width
        self.reduction_ratio = reduction_ratio
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.image_loss_weights = image_loss_weights
        self.kspace_loss_weights = kspace_loss_weights
        self.seed = seed
        self.checkpoint_dir = checkpoint_dir

    def _cascade_config(self, ncoil):
        channels = 2 * ncoil
        net = SENetConfig(channels, channels, self.base_width, self.depth,
                          self.reduction_ratio)
        return CascadeConfig(
            n_iterations=self.n_iterations,
            use_cross_iteration_residual=self.cross_iteration_residual,
            inet=net,
            knet=SENetConfig(channels, channels, self.base_width, self.depth,
                             self.reduction_ratio),
            dc=DCConfig(self.dc_lambda),
            ncoil=ncoil,
        )

    def _loss_weights(self):
        if self.image_loss_weights is None and self.kspace_loss_weights is None:
            return None
        image = self.image_loss_weights or LossWeights.default_for(
            self.n_iterations
        ).lambda_image
        kspace = self.kspace_loss_weights or image
        return LossWeights(tuple(image), tuple(kspace))

    def fit(self, X, y=None, validation=None):
        """Train on (fully sampled KSpaceVolume, SamplingMask) pairs.

        ``validation`` takes pairs of the same form; when omitted the
        training pairs double as the validation set, so pass a held-out
        set for honest model selection.
        """
        pairs, geometry = check_volume_mask_pairs(X)
        val_pairs = pairs if validation is None else check_volume_mask_pairs(
            validation, "validation"
        )[0]
        ncoil = geometry[0]

        records = []
        split = DatasetSplit()
        for prefix, group, ids in (("train", pairs, split.train),
                                   ("val", val_pairs, split.val)):
            for i, (volume, mask) in enumerate(group):
                sid = f"{prefix}-{i:05d}"
                records.append(SliceRecord(sid, volume.complex(), mask.lines.copy()))
                ids.append(sid)
        split.test = []

        import tempfile

        ckpt_dir = self.checkpoint_dir
        with tempfile.TemporaryDirectory() as tmp:
            train_cfg = TrainConfig(
                epochs=self.epochs,
                learning_rate=self.learning_rate,
                batch_size=self.batch_size,
                seed=self.seed,
                checkpoint_dir=ckpt_dir or tmp,
                loss_weights=self._loss_weights(),
            )
            model, history = train(records, split, self._cascade_config(ncoil), train_cfg)
        self.model_ = model
        self.history_ = history.rows
        self.geometry_ = geometry
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ShapeMismatchError("estimator is not fitted; call fit first")

    def predict(self, X):
        """Reconstruct magnitude images from (masked volume, mask) pairs."""
        self._check_fitted()
        pairs, geometry = check_volume_mask_pairs(X)
        if geometry != self.geometry_:
            raise ShapeMismatchError(
                f"predict geometry {geometry} differs from fitted {self.geometry_}"
            )
        images = []
        for volume, mask in pairs:
            out = self.model_(volume.data, mask.lines[None, :])
            images.append(out.final_image.data[0])
        return images

    def score(self, X, y=None):
        """Negative mean NMSE%% of reconstructions against the RSS truth.

        ``X`` holds fully sampled volumes plus masks; masking happens here
        so the ground truth is known.
        """
        self._check_fitted()
        pairs, _ = check_volume_mask_pairs(X)
        from .mri import rss_reconstruct

        values = []
        for volume, mask in pairs:
            truth = rss_reconstruct(volume).data
            masked = apply_mask(volume, mask)
            out = self.model_(masked.data, mask.lines[None, :])
            values.append(nmse(out.final_image.data[0], truth))
        return -float(np.mean(values))
