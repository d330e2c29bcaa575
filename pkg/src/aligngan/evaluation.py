"""Quantitative alignment metrics over shared-noise generations.

The alignment evidence is measured, not eyeballed: generate with the same
noise under different domain vectors and score how well the pair matches the
expected cross-domain transform.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape
from .networks import Network, forward, one_hot

MIN_EVAL_SAMPLES = 100


@dataclass(frozen=True)
class EvalReport:
    metric: str
    value: float
    sample_count: int
    seed: int
    checkpoint_id: int | None = None

    def __post_init__(self):
        if self.sample_count < MIN_EVAL_SAMPLES:
            raise ValueError(
                f"reported aggregates need >= {MIN_EVAL_SAMPLES} samples, "
                f"got {self.sample_count}"
            )

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "value": self.value,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "checkpoint_id": self.checkpoint_id,
        }


def generate(gen: Network, z: np.ndarray, domain_index: int,
             label_index: int | None = None) -> np.ndarray:
    """Forward the generator for one domain (and optionally one class)."""
    K_d = gen.spec.domain_count
    dv = one_hot(domain_index, K_d)
    lv = None
    if gen.spec.label_count > 0:
        lv = (one_hot(label_index, gen.spec.label_count)
              if label_index is not None
              else np.zeros(gen.spec.label_count))
    return forward(gen, z, domain=dv, label=lv, tape=Tape()).data


def aligned_pairs(gen: Network, z_batch: np.ndarray,
                  domains: tuple = (0, 1)) -> tuple[np.ndarray, np.ndarray]:
    """(G(z|A), G(z|B)) for every z: same noise, different domain vector."""
    a, b = domains
    return generate(gen, z_batch, a), generate(gen, z_batch, b)


def negation_consistency(pairs: tuple[np.ndarray, np.ndarray]) -> float:
    """mean |G(z|A) + G(z|B)|; 0 means exact anti-alignment in [-1, 1]."""
    a, b = pairs
    return float(np.abs(a + b).mean())


def alignment_correlation(pairs: tuple[np.ndarray, np.ndarray],
                          transform) -> float:
    """Pearson r between flattened transform(G(z|A)) and G(z|B).

    Undefined (zero variance on either side) is reported as nan.
    """
    a, b = pairs
    if len(a) < MIN_EVAL_SAMPLES:
        raise ValueError(f"need >= {MIN_EVAL_SAMPLES} pairs, got {len(a)}")
    x = np.asarray(transform(a), dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    sx, sy = x.std(), y.std()
    if sx == 0.0 or sy == 0.0:
        return float("nan")
    return float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))


class CentroidClassifier:
    """Nearest mean-image classifier; deterministic and dependency-free."""

    def __init__(self, samples: np.ndarray, labels: np.ndarray, class_count: int):
        self.centroids = np.zeros((class_count,) + samples.shape[1:])
        for c in range(class_count):
            mask = labels == c
            if not mask.any():
                raise ValueError(f"class {c} missing from evaluation data")
            self.centroids[c] = samples[mask].mean(axis=0)

    def predict(self, samples: np.ndarray) -> np.ndarray:
        flat = samples.reshape(len(samples), -1)
        cent = self.centroids.reshape(len(self.centroids), -1)
        d2 = ((flat[:, None, :] - cent[None, :, :]) ** 2).sum(axis=2)
        return d2.argmin(axis=1)


def label_propagation_accuracy(gen: Network, eval_samples: np.ndarray,
                               eval_labels: np.ndarray, class_count: int,
                               per_class_count: int, target_domain: int = 1,
                               seed: int = 0) -> float:
    """Fraction of class-conditioned target generations that land on the
    right class centroid.

    The classifier is fit on held-out real labeled target-domain data used
    for evaluation only.
    """
    total = class_count * per_class_count
    if total < MIN_EVAL_SAMPLES:
        raise ValueError(
            f"need >= {MIN_EVAL_SAMPLES} generated samples, got {total}"
        )
    clf = CentroidClassifier(eval_samples, eval_labels, class_count)
    rng = np.random.default_rng(seed)
    hits = 0
    for c in range(class_count):
        z = rng.uniform(-1.0, 1.0, size=(per_class_count, gen.spec.noise_dim))
        out = generate(gen, z, target_domain, label_index=c)
        hits += int((clf.predict(out) == c).sum())
    return hits / total
