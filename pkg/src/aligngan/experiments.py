"""Task wiring: datasets, network specs and metrics for each experiment.

Seeds are derived deterministically from the config seed so that a whole run
is a pure function of the config text.
"""
from __future__ import annotations

import math

import numpy as np

from . import datasets, evaluation
from .config import ConfigError, ExperimentConfig
from .datasets import Domain, DomainDataset, glyph_dataset, make_negative
from .networks import (default_discriminator_spec, default_generator_spec,
                       mlp_discriminator_spec, mlp_generator_spec)
from .training import TrainResult, train_aligngan, train_multi_info

EVAL_PAIRS_2D = 1000
EVAL_PAIRS_GLYPH = 256

_DATA_SEED_OFFSET = 101
_EVAL_SEED_OFFSET = 707


def _eval_noise(cfg: ExperimentConfig, n: int) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed + _EVAL_SEED_OFFSET)
    return rng.uniform(-1.0, 1.0, size=(n, cfg.noise_dim))


def _pair_metric(cfg: ExperimentConfig, n: int, scorer):
    z = _eval_noise(cfg, n)

    def metric_fn(gen, disc):
        pairs = evaluation.aligned_pairs(gen, z)
        return scorer(pairs)

    return metric_fn


def _correlation_scorer(transform, name="alignment_correlation"):
    def scorer(pairs):
        return {name: evaluation.alignment_correlation(pairs, transform)}
    return scorer


def _consistency_scorer(pairs):
    return {"negation_consistency": evaluation.negation_consistency(pairs)}


def _load_idx_domain(path: str) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            arr = datasets.parse_idx(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read IDX file {path}: {exc}") from exc
    if arr.ndim == 3:
        arr = arr[:, None, :, :]
    if arr.ndim != 4:
        raise ConfigError(f"IDX file {path} is not an image stack")
    return arr


def run_experiment(cfg: ExperimentConfig) -> TrainResult:
    train_cfg = cfg.to_train_config()
    meta = {"task": cfg.task, "class_count": cfg.class_count}
    data_seed = cfg.seed + _DATA_SEED_OFFSET

    if cfg.task == "negation_2d":
        dataset = datasets.gaussian_pair_domains(cfg.dataset_size, seed=data_seed)
        gen_spec = mlp_generator_spec(cfg.noise_dim, hidden=tuple(cfg.hidden))
        disc_spec = mlp_discriminator_spec(2, hidden=tuple(cfg.hidden))
        metric_fn = _pair_metric(cfg, EVAL_PAIRS_2D,
                                 _correlation_scorer(np.negative))
        return train_aligngan(train_cfg, dataset, gen_spec, disc_spec,
                              metric_fn, extra_meta=meta)

    if cfg.task in ("glyph_negative", "glyph_edge"):
        transform = "negative" if cfg.task == "glyph_negative" else "edge"
        dataset = datasets.glyph_pair_domains(
            cfg.dataset_size, transform, cfg.class_count, cfg.jitter,
            seed=data_seed)
        gen_spec = default_generator_spec(cfg.noise_dim, base=cfg.base_channels,
                                          normalize=cfg.normalize)
        disc_spec = default_discriminator_spec(base=cfg.base_channels,
                                               normalize=cfg.normalize)
        if cfg.task == "glyph_negative":
            scorer = _consistency_scorer
        else:
            scorer = _correlation_scorer(lambda a: datasets.make_edge(a))
        metric_fn = _pair_metric(cfg, EVAL_PAIRS_GLYPH, scorer)
        return train_aligngan(train_cfg, dataset, gen_spec, disc_spec,
                              metric_fn, extra_meta=meta)

    if cfg.task == "idx_pair":
        if not cfg.idx_images_a or not cfg.idx_images_b:
            raise ConfigError("idx_pair needs idx_images_a and idx_images_b")
        xa = _load_idx_domain(cfg.idx_images_a)
        xb = _load_idx_domain(cfg.idx_images_b)
        if xa.shape[1:] != xb.shape[1:]:
            raise ConfigError("IDX domains have different image shapes")
        dataset = DomainDataset([Domain(xa), Domain(xb)],
                                provenance="idx ingestion")
        shape = xa.shape[1:]
        gen_spec = default_generator_spec(cfg.noise_dim, image_shape=shape,
                                          base=cfg.base_channels)
        disc_spec = default_discriminator_spec(image_shape=shape,
                                               base=cfg.base_channels)
        metric_fn = _pair_metric(
            cfg, EVAL_PAIRS_GLYPH,
            _correlation_scorer(lambda a: a, "alignment_correlation"))
        return train_aligngan(train_cfg, dataset, gen_spec, disc_spec,
                              metric_fn, extra_meta=meta)

    if cfg.task == "multi_info_glyph":
        xs, ls = glyph_dataset(cfg.dataset_size, cfg.class_count, cfg.jitter,
                               seed=data_seed)
        xt_raw, _ = glyph_dataset(cfg.dataset_size, cfg.class_count, cfg.jitter,
                                  seed=data_seed + 1)
        source = Domain(xs, ls)
        target = Domain(make_negative(xt_raw))
        gen_spec = default_generator_spec(cfg.noise_dim,
                                          label_count=cfg.class_count,
                                          base=cfg.base_channels,
                                          normalize=cfg.normalize)
        disc_spec = default_discriminator_spec(label_count=cfg.class_count,
                                               base=cfg.base_channels,
                                               normalize=cfg.normalize)
        metric_fn = label_propagation_metric(cfg)
        return train_multi_info(train_cfg, source, target, gen_spec, disc_spec,
                                metric_fn, extra_meta=meta)

    raise ConfigError(f"unknown task {cfg.task!r}")


def eval_glyph_target_data(cfg_seed: int, class_count: int, jitter: float,
                           n: int = 600):
    """Held-out labeled negative-glyph data, used only for evaluation."""
    x, labels = glyph_dataset(n, class_count, jitter,
                              seed=cfg_seed + _EVAL_SEED_OFFSET + 1)
    return make_negative(x), labels


def label_propagation_metric(cfg: ExperimentConfig):
    eval_x, eval_l = eval_glyph_target_data(cfg.seed, cfg.class_count, cfg.jitter)
    per_class = math.ceil(120 / cfg.class_count)

    def metric_fn(gen, disc):
        acc = evaluation.label_propagation_accuracy(
            gen, eval_x, eval_l, cfg.class_count, per_class,
            seed=cfg.seed + _EVAL_SEED_OFFSET)
        return {"label_propagation_accuracy": acc}

    return metric_fn
