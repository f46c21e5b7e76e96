"""Built-in synthetic datasets so the toolkit can verify itself offline.

The base task is sine-vs-bump: class 0 is a phase-jittered sine, class 1
is the same sine plus one (or more) localized Gaussian bumps.  The task is
1-NN-Euclidean separable at the default settings, which the test suite
checks with an independent nearest-neighbour oracle before any network is
trained on it.

Variants:

* ``sine-bump``        clean two-class task (length 64, 50/50 by default)
* ``sine-bump-noisy``  same signals with a fraction of train labels flipped
* ``sine-two-bumps``   class 1 carries two off-center bumps (transfer target)
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .data import TimeSeries, TimeSeriesDataset, z_normalize
from .errors import DomainError

__all__ = ["make_sine_bump", "make_variant", "write_dataset_files", "VARIANTS"]


def _one_series(rng: np.random.Generator, length: int, label: int,
                n_bumps: int, noise_std: float) -> np.ndarray:
    t = np.linspace(0.0, 1.0, length)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    x = np.sin(2.0 * np.pi * 2.0 * t + phase)
    if label == 1:
        centers = [0.5] if n_bumps == 1 else [0.3, 0.7]
        for c in centers:
            x = x + 2.0 * np.exp(-((t - c) ** 2) / (2.0 * 0.05**2))
    return x + rng.normal(0.0, noise_std, size=length)


def make_sine_bump(
    n_train: int = 50,
    n_test: int = 50,
    length: int = 64,
    seed: int = 0,
    label_noise: float = 0.0,
    n_bumps: int = 1,
    noise_std: float = 0.05,
    name: str | None = None,
) -> TimeSeriesDataset:
    """Generate a two-class sine-vs-bump dataset, z-normalized per series.

    ``label_noise`` flips that fraction of *train* labels (rounded down),
    chosen deterministically from the seed; test labels are never touched.
    """
    if n_train < 2 or n_test < 2:
        raise DomainError("need at least 2 series per split")
    if not 0.0 <= label_noise < 1.0:
        raise DomainError("label_noise must lie in [0, 1)")
    if n_bumps not in (1, 2):
        raise DomainError("n_bumps must be 1 or 2")
    rng = np.random.default_rng(seed)

    def split(n: int, flip_fraction: float) -> tuple[TimeSeries, ...]:
        true_labels = np.array([i % 2 for i in range(n)], dtype=int)
        true_labels = true_labels[rng.permutation(n)]
        observed = true_labels.copy()
        n_flip = int(flip_fraction * n)
        if n_flip:
            # the signal keeps its true shape; only the recorded label flips
            idx = rng.choice(n, size=n_flip, replace=False)
            observed[idx] = 1 - observed[idx]
        return tuple(
            z_normalize(TimeSeries(_one_series(rng, length, int(t), n_bumps, noise_std), int(o)))
            for t, o in zip(true_labels, observed)
        )

    train = split(n_train, label_noise)
    test = split(n_test, 0.0)
    if name is None:
        base = "SineBump" if n_bumps == 1 else "SineTwoBumps"
        name = base + ("Noisy" if label_noise > 0 else "")
    return TimeSeriesDataset(name=name, train=train, test=test,
                             n_classes=2, series_length=length)


#: CLI-facing variant registry: variant id -> keyword overrides
VARIANTS = {
    "sine-bump": {},
    "sine-bump-noisy": {"label_noise": 0.1},
    "sine-two-bumps": {"n_bumps": 2},
}


def make_variant(variant: str, **overrides) -> TimeSeriesDataset:
    """Build one of the named variants; extra keywords override defaults."""
    if variant not in VARIANTS:
        raise DomainError(f"unknown variant {variant!r}; known: {sorted(VARIANTS)}")
    kwargs = dict(VARIANTS[variant])
    kwargs.update(overrides)
    return make_sine_bump(**kwargs)


def write_dataset_files(dataset: TimeSeriesDataset, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``<Name>_TRAIN.tsv`` / ``<Name>_TEST.tsv`` archive-format files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for split_name in ("TRAIN", "TEST"):
        split = dataset.train if split_name == "TRAIN" else dataset.test
        path = out_dir / f"{dataset.name}_{split_name}.tsv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for s in split:
                fields = [str(s.label)] + [repr(float(v)) for v in s.values]
                fh.write("\t".join(fields) + "\n")
        paths.append(path)
    return paths[0], paths[1]
