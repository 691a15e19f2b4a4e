"""Flat key=value experiment configuration with section prefixes.

The text form is diff-friendly and round-trips losslessly: floats are
serialized with repr so parsing returns the identical bits. Unknown keys
and malformed lines raise errors citing the line number.
"""

from dataclasses import dataclass, fields

from .cascade import CascadeConfig, DCConfig
from .errors import ConfigError
from .senet import SENetConfig
from .training import LossWeights, TrainConfig


@dataclass
class ExperimentConfig:
    dataset_height: int = 64
    dataset_width: int = 64
    dataset_ncoil: int = 4
    dataset_slices: int = 200
    dataset_n_ellipses: int = 8
    dataset_noise_sigma: float = 0.0
    dataset_seed: int = 42
    mask_acceleration: float = 8.0
    mask_center_fraction: float = 0.04
    split_train_fraction: float = 2.0 / 3.0
    split_val_fraction: float = 1.0 / 6.0
    split_test_fraction: float = 1.0 / 6.0
    split_seed: int = 42
    inet_depth: int = 3
    inet_base_width: int = 32
    inet_reduction_ratio: int = 8
    knet_depth: int = 3
    knet_base_width: int = 32
    knet_reduction_ratio: int = 8
    cascade_n_iterations: int = 2
    cascade_residuals: bool = True
    cascade_dc_lambda: float = 0.05
    train_epochs: int = 50
    train_learning_rate: float = 1e-4
    train_batch_size: int = 2
    train_seed: int = 7
    train_loss_weights_image: str = ""
    train_loss_weights_kspace: str = ""
    paths_dataset: str = "dataset.ddmk"
    paths_split_manifest: str = "split.tsv"
    paths_checkpoint_dir: str = "checkpoints"
    paths_history: str = "history.tsv"
    paths_report_dir: str = "reports"

    def __post_init__(self):
        self.validate()

    def validate(self):
        total = (
            self.split_train_fraction + self.split_val_fraction + self.split_test_fraction
        )
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"split fractions sum to {total}, expected 1")
        paths = [
            self.paths_dataset,
            self.paths_split_manifest,
            self.paths_checkpoint_dir,
            self.paths_history,
            self.paths_report_dir,
        ]
        if len(set(paths)) != len(paths):
            raise ConfigError(f"configured paths must be distinct, got {paths}")

    def to_text(self):
        lines = []
        for f in fields(self):
            key = f.name.replace("_", ".", 1)
            value = getattr(self, f.name)
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{key}={text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        by_key = {f.name.replace("_", ".", 1): f for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in by_key:
                raise ConfigError(f"line {lineno}: unknown key '{key}'")
            f = by_key[key]
            try:
                if f.type == "bool" or f.type is bool:
                    if value not in ("true", "false"):
                        raise ValueError(f"expected true/false, got {value!r}")
                    parsed = value == "true"
                elif f.type == "int" or f.type is int:
                    parsed = int(value)
                elif f.type == "float" or f.type is float:
                    parsed = float(value)
                else:
                    parsed = value
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for '{key}': {exc}") from exc
            values[f.name] = parsed
        return cls(**values)

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_text(f.read())

    # Constructors for the runtime configuration objects.

    def senet_configs(self):
        channels = 2 * self.dataset_ncoil
        inet = SENetConfig(channels, channels, self.inet_base_width, self.inet_depth,
                           self.inet_reduction_ratio)
        knet = SENetConfig(channels, channels, self.knet_base_width, self.knet_depth,
                           self.knet_reduction_ratio)
        return inet, knet

    def cascade_config(self):
        inet, knet = self.senet_configs()
        return CascadeConfig(
            n_iterations=self.cascade_n_iterations,
            use_cross_iteration_residual=self.cascade_residuals,
            inet=inet,
            knet=knet,
            dc=DCConfig(self.cascade_dc_lambda),
            ncoil=self.dataset_ncoil,
        )

    def loss_weights(self):
        if not self.train_loss_weights_image and not self.train_loss_weights_kspace:
            return None
        image = _parse_weights(self.train_loss_weights_image, self.cascade_n_iterations)
        kspace = _parse_weights(self.train_loss_weights_kspace, self.cascade_n_iterations)
        return LossWeights(image, kspace)

    def train_config(self, checkpoint_dir):
        return TrainConfig(
            epochs=self.train_epochs,
            learning_rate=self.train_learning_rate,
            batch_size=self.train_batch_size,
            seed=self.train_seed,
            checkpoint_dir=checkpoint_dir,
            loss_weights=self.loss_weights(),
        )

    def split_fractions(self):
        return (
            self.split_train_fraction,
            self.split_val_fraction,
            self.split_test_fraction,
        )


def _parse_weights(text, n):
    if not text:
        return LossWeights.default_for(n).lambda_image
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad loss weights '{text}': {exc}") from exc
    if len(values) != n:
        raise ConfigError(
            f"{len(values)} loss weights configured for {n} cascade iterations"
        )
    return values
