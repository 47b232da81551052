"""Datasets: synthetic 2-D Gaussian mixtures and image folders.

Both produce an immutable :class:`Dataset` of float64 samples with a fixed
``value_range``.  Images are scaled to [-1, 1] via ``v / 127.5 - 1`` so the
generator's bounded output activation matches the data exactly; mixtures
keep their native coordinates and record a range wide enough (10 sigma)
to contain every draw.

Minibatch iteration reshuffles every epoch and drops the final partial
batch.  The permutation of epoch ``e`` is derived purely from
``(shuffle_seed, e)``, so the whole stream is a pure function of
``(dataset, batch_size, shuffle_seed)`` — which is what makes interrupted
training resumable bit-for-bit.
"""

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigurationError, DataError

__all__ = [
    "Dataset",
    "MixtureSpec",
    "ring_centers",
    "make_gaussian_mixture",
    "load_image_folder",
    "minibatches",
    "epoch_permutation",
    "batch_for_step",
    "save_points_csv",
    "array_to_uint8",
    "uint8_to_array",
    "save_image",
]


@dataclass
class Dataset:
    """An in-memory collection of fixed-shape samples."""

    samples: np.ndarray
    value_range: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.value_range = (float(self.value_range[0]), float(self.value_range[1]))
        if self.samples.ndim < 2 or len(self.samples) == 0:
            raise DataError("a dataset needs at least one sample with a fixed shape")
        if not np.all(np.isfinite(self.samples)):
            raise DataError("dataset contains non-finite values")

    def __len__(self):
        return len(self.samples)

    @property
    def sample_shape(self):
        return self.samples.shape[1:]


@dataclass(frozen=True)
class MixtureSpec:
    """Equally spaced Gaussian modes on a circle (the ring benchmark)."""

    n_modes: int = 8
    radius: float = 2.0
    mode_std: float = 0.02
    samples_per_mode: int = 1000

    def validate(self):
        if self.n_modes < 1:
            raise ConfigurationError(f"n_modes: must be positive, got {self.n_modes}")
        if self.radius <= 0:
            raise ConfigurationError(f"radius: must be positive, got {self.radius}")
        if self.mode_std < 0:
            raise ConfigurationError(f"mode_std: must be >= 0, got {self.mode_std}")
        if self.samples_per_mode < 1:
            raise ConfigurationError(
                f"samples_per_mode: must be positive, got {self.samples_per_mode}")


def ring_centers(n_modes, radius):
    """Mode centers at angles 2*pi*k/n on a circle of the given radius.

    Coordinates whose exact value is zero (the axis crossings) are snapped
    to 0.0 to remove float trig noise, so e.g. an 8-mode ring of radius 2
    contains (2, 0) and (-2, 0) exactly.
    """
    angles = 2.0 * np.pi * np.arange(n_modes) / n_modes
    centers = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    centers[np.abs(centers) < 1e-12 * radius] = 0.0
    return centers


def make_gaussian_mixture(spec, seed):
    """Draw ``n_modes * samples_per_mode`` points, mode blocks in order."""
    spec.validate()
    centers = ring_centers(spec.n_modes, spec.radius)
    rng = np.random.default_rng(int(seed))
    noise = rng.standard_normal((spec.n_modes, spec.samples_per_mode, 2))
    points = centers[:, None, :] + spec.mode_std * noise
    points = points.reshape(-1, 2)
    # 10 sigma beyond the ring bounds every draw in practice; clip keeps the
    # value-range invariant airtight anyway
    limit = spec.radius + 10.0 * spec.mode_std
    np.clip(points, -limit, limit, out=points)
    return Dataset(
        samples=points,
        value_range=(-limit, limit),
        metadata={
            "kind": "gaussian_mixture",
            "n_modes": spec.n_modes,
            "radius": spec.radius,
            "mode_std": spec.mode_std,
            "samples_per_mode": spec.samples_per_mode,
            "seed": int(seed),
            "centers": centers.tolist(),
        },
    )


def array_to_uint8(x):
    """Map [-1, 1] float samples to uint8 pixels (inverse of uint8_to_array)."""
    return np.clip(np.rint((np.asarray(x) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def uint8_to_array(pixels):
    """Map uint8 pixels to [-1, 1] float64 samples."""
    return np.asarray(pixels, dtype=np.float64) / 127.5 - 1.0


def save_image(path, sample):
    """Write one (h, w, c) sample in [-1, 1] to a PNG/JPEG file."""
    arr = array_to_uint8(sample)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    Image.fromarray(arr).save(path)


def _load_one_image(path, resolution):
    with Image.open(path) as img:
        img = img.convert("RGB")
        w, h = img.size
        if w != h:  # center-crop to square before resizing
            side = min(w, h)
            left, top = (w - side) // 2, (h - side) // 2
            img = img.crop((left, top, left + side, top + side))
        if img.size != (resolution[1], resolution[0]):
            img = img.resize((resolution[1], resolution[0]), Image.BILINEAR)
        return uint8_to_array(np.asarray(img))


def load_image_folder(path, resolution, mirror_augment=True):
    """Load every decodable PNG/JPEG under ``path`` at the given (h, w).

    With ``mirror_augment`` each image is followed by its left-right
    mirror, exactly doubling the dataset.  Undecodable files are skipped
    with a warning; a folder yielding no usable image is a data error.
    """
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"image folder not found: {root}")
    files = sorted(p for p in root.iterdir()
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp"))
    if not files:
        raise DataError(f"no image files in {root}")
    items = []
    for f in files:
        try:
            img = _load_one_image(f, resolution)
        except (UnidentifiedImageError, OSError) as exc:
            warnings.warn(f"skipping undecodable image {f.name}: {exc}")
            continue
        items.append(img)
        if mirror_augment:
            items.append(img[:, ::-1, :].copy())
    if not items:
        raise DataError(f"no decodable images in {root}")
    return Dataset(
        samples=np.stack(items),
        value_range=(-1.0, 1.0),
        metadata={
            "kind": "image_folder",
            "path": str(root),
            "resolution": list(resolution),
            "mirror_augment": bool(mirror_augment),
            "n_source_files": len(files),
        },
    )


def epoch_permutation(n_items, shuffle_seed, epoch):
    """The deterministic item order for one epoch."""
    seq = np.random.SeedSequence(entropy=int(shuffle_seed), spawn_key=(int(epoch),))
    return np.random.default_rng(seq).permutation(n_items)


def batches_per_epoch(n_items, batch_size):
    return n_items // batch_size


def batch_for_step(dataset, batch_size, shuffle_seed, step):
    """The minibatch a sequential reader would see at 0-based ``step``."""
    per = batches_per_epoch(len(dataset), batch_size)
    if per < 1:
        raise ConfigurationError(
            f"batch_size {batch_size} exceeds dataset size {len(dataset)}")
    epoch, slot = divmod(int(step), per)
    perm = epoch_permutation(len(dataset), shuffle_seed, epoch)
    idx = perm[slot * batch_size:(slot + 1) * batch_size]
    return dataset.samples[idx]


def minibatches(dataset, batch_size, shuffle_seed, epochs=None):
    """Yield epoch-wise reshuffled batches, dropping partial tails.

    The stream is a pure function of its arguments: the same seed always
    yields the same batch sequence.  ``epochs=None`` streams forever.
    """
    per = batches_per_epoch(len(dataset), batch_size)
    if per < 1:
        raise ConfigurationError(
            f"batch_size {batch_size} exceeds dataset size {len(dataset)}")
    epoch = 0
    while epochs is None or epoch < epochs:
        perm = epoch_permutation(len(dataset), shuffle_seed, epoch)
        for slot in range(per):
            idx = perm[slot * batch_size:(slot + 1) * batch_size]
            yield dataset.samples[idx]
        epoch += 1


def save_points_csv(dataset, path):
    """Export a 2-D point dataset as an x,y CSV for inspection."""
    samples = dataset.samples if isinstance(dataset, Dataset) else np.asarray(dataset)
    if samples.ndim != 2 or samples.shape[1] != 2:
        raise DataError(f"expected (n, 2) points, got shape {samples.shape}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        writer.writerows(samples.tolist())
