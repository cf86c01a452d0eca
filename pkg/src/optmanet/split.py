"""Train/test partitions: random percentage, spatial quadrant, spatial
radial. The spatial splits exist to measure extrapolation; their boundary
rows always land in train. Every split is an exact partition of the input
rows, preserved in original order."""

import numpy as np

from .errors import ConfigError, ContractError


def _both_sides_nonempty(train_idx, test_idx, what):
    if train_idx.size == 0 or test_idx.size == 0:
        raise ConfigError(f"{what} split leaves one side empty")


def split_percentage(dataset, fraction, seed):
    """Uniform random selection of floor(fraction * n) training rows."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"fraction must lie in (0, 1), got {fraction}")
    n = len(dataset)
    k = int(np.floor(fraction * n))
    if k < 1 or k >= n:
        raise ConfigError(
            f"fraction {fraction} of {n} rows leaves an empty side"
        )
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    perm = rng.permutation(n)
    train_idx = np.sort(perm[:k])
    test_idx = np.sort(perm[k:])
    extra = {"split": "percentage", "fraction": fraction, "split_seed": seed}
    return (
        dataset.subset(train_idx, **extra, side="train"),
        dataset.subset(test_idx, **extra, side="test"),
    )


def split_quadrant(dataset):
    """Train on the quarter-space y >= 0 and z >= 0, test everywhere else.
    Requires 3-D inputs."""
    if dataset.n_features != 3:
        raise ContractError("quadrant split needs (x, y, z) inputs")
    mask = (dataset.inputs[:, 1] >= 0.0) & (dataset.inputs[:, 2] >= 0.0)
    train_idx = np.flatnonzero(mask)
    test_idx = np.flatnonzero(~mask)
    _both_sides_nonempty(train_idx, test_idx, "quadrant")
    extra = {"split": "quadrant"}
    return (
        dataset.subset(train_idx, **extra, side="train"),
        dataset.subset(test_idx, **extra, side="test"),
    )


def split_radial(dataset, center=None):
    """Train inside the ball of radius R = (max distance from center) / 2,
    boundary inclusive; test outside. The center defaults to the origin,
    where the sources sit. Returns (train, test, radius)."""
    if dataset.n_features != 3:
        raise ContractError("radial split needs (x, y, z) inputs")
    if center is None:
        center = np.zeros(3)
    center = np.asarray(center, dtype=np.float64).reshape(3)
    dist = np.sqrt(((dataset.inputs - center) ** 2).sum(axis=1))
    radius = float(dist.max() / 2.0)
    mask = dist <= radius
    train_idx = np.flatnonzero(mask)
    test_idx = np.flatnonzero(~mask)
    _both_sides_nonempty(train_idx, test_idx, "radial")
    extra = {"split": "radial", "radius": radius}
    return (
        dataset.subset(train_idx, **extra, side="train"),
        dataset.subset(test_idx, **extra, side="test"),
        radius,
    )
