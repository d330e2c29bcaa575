"""Adam optimization and the two adversarial training loops.

train_aligngan runs the standard loop: per step, one discriminator update on
real-vs-generated batches from every domain (both conditioned on their domain
vectors), then one generator update against the already-updated discriminator.

train_multi_info runs the 2-step alternating schedule: steps with
step mod tau == 0 train on source images with label vectors and zeroed domain
vectors; all other steps train on source+target images with domain vectors
and zeroed label vectors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import checkpoint as ckpt
from . import objectives
from .autodiff import Tape
from .networks import Network, NetworkSpec, build_network, one_hot
from .objectives import ObjectiveKind


class TrainingError(RuntimeError):
    pass


class DatasetError(ValueError):
    pass


@dataclass
class TrainConfig:
    objective: ObjectiveKind
    learning_rate: float
    total_steps: int
    seed: int = 0
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    tau: int = 4
    metric_every: int = 500
    checkpoint_every: int = 500
    saturating_g: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.tau < 2:
            raise ValueError("tau must be >= 2")


class Adam:
    """Bias-corrected Adam over a named parameter dict (updates in place)."""

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict[str, np.ndarray], step_index: int | None = None):
        for name in self.params:
            g = grads[name]
            if not np.all(np.isfinite(g)):
                where = step_index if step_index is not None else self.t
                raise TrainingError(
                    f"non-finite gradient for {name!r} at step {where}"
                )
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def schedule_kind(step: int, tau: int) -> str:
    """'label_step' when step mod tau == 0, else 'domain_step'."""
    if step < 0 or tau < 2:
        raise ValueError("need step >= 0 and tau >= 2")
    return "label_step" if step % tau == 0 else "domain_step"


def _param_grads(net: Network, tape: Tape, gmap: dict) -> dict[str, np.ndarray]:
    leaves = net.bind(tape)
    return {
        name: gmap.get(t.node_id, np.zeros_like(t.data))
        for name, t in leaves.items()
    }


def _losses(objective: ObjectiveKind, saturating_g: bool):
    if objective.kind == "lsgan":
        return objectives.lsgan_d_loss, objectives.lsgan_g_loss
    # regular GAN: squash raw scores first
    def d_loss(dr, df):
        return objectives.gan_d_loss(ad.sigmoid(dr), ad.sigmoid(df))

    def g_loss(df):
        return objectives.gan_g_loss(ad.sigmoid(df), saturating=saturating_g)

    return d_loss, g_loss


@dataclass
class TrainResult:
    checkpoints: list  # (step id, container bytes)
    metrics: list  # metric rows (dicts)
    gen: Network
    disc: Network
    trace: list = field(default_factory=list)

    def metrics_jsonl(self) -> str:
        return "".join(json.dumps(row, sort_keys=True) + "\n" for row in self.metrics)


def _update_pair(gen, disc, z, real, dv_real, dv_fake, lv_real, lv_fake,
                 d_loss_fn, g_loss_fn, adam_d, adam_g, step, trace):
    """One D update then one G update on a shared minibatch."""
    from .networks import forward

    # D update: fakes from the current generator, detached
    fake = forward(gen, z, domain=dv_fake, label=lv_fake, tape=Tape()).data
    tape = Tape()
    dr = forward(disc, real, domain=dv_real, label=lv_real, tape=tape)
    df = forward(disc, fake, domain=dv_fake, label=lv_fake, tape=tape)
    loss_d = d_loss_fn(dr, df)
    gmap = ad.backward(tape, loss_d)
    adam_d.step(_param_grads(disc, tape, gmap), step_index=step)
    trace.append({"step": step, "phase": "d_update", "d_version": adam_d.t})

    # G update against the already-updated discriminator
    tape = Tape()
    g_out = forward(gen, z, domain=dv_fake, label=lv_fake, tape=tape)
    d_out = forward(disc, g_out, domain=dv_fake, label=lv_fake, tape=tape)
    loss_g = g_loss_fn(d_out)
    gmap = ad.backward(tape, loss_g)
    adam_g.step(_param_grads(gen, tape, gmap), step_index=step)
    trace.append({"step": step, "phase": "g_update", "d_version": adam_d.t})
    return float(loss_d.data), float(loss_g.data)


def _run_loop(config: TrainConfig, gen: Network, disc: Network, step_fn,
              metric_fn=None, extra_meta=None) -> TrainResult:
    result = TrainResult(checkpoints=[], metrics=[], gen=gen, disc=disc)

    def snapshot(step, d_loss, g_loss):
        row = {"step": step, "d_loss": d_loss, "g_loss": g_loss}
        take_ckpt = step == 0 or step == config.total_steps or (
            config.checkpoint_every and step % config.checkpoint_every == 0)
        if take_ckpt:
            meta = {"step": step, "objective": config.objective.kind}
            meta.update(extra_meta or {})
            blob = ckpt.dump(gen, disc, meta=meta)
            result.checkpoints.append((step, blob))
            row["checkpoint_id"] = step
        if metric_fn is not None:
            row.update(metric_fn(gen, disc))
        result.metrics.append(row)

    snapshot(0, None, None)
    for step in range(config.total_steps):
        d_loss, g_loss = step_fn(step, result.trace)
        done = step + 1
        if done == config.total_steps or (
                config.metric_every and done % config.metric_every == 0):
            snapshot(done, d_loss, g_loss)
    return result


def train_aligngan(config: TrainConfig, dataset, gen_spec: NetworkSpec,
                   disc_spec: NetworkSpec, metric_fn=None,
                   extra_meta=None) -> TrainResult:
    """Adversarial alignment training over unpaired multi-domain data."""
    domains = dataset.domains
    if len(domains) < 2:
        raise DatasetError("need at least two domains")
    for i, dom in enumerate(domains):
        if len(dom.samples) == 0:
            raise DatasetError(f"domain {i} is empty")
    K_d = len(domains)
    if gen_spec.domain_count != K_d or disc_spec.domain_count != K_d:
        raise DatasetError("spec domain_count does not match dataset")

    root = np.random.SeedSequence(config.seed)
    ss_gen, ss_disc, ss_loop = root.spawn(3)
    gen = build_network(gen_spec, seed=_seed_int(ss_gen))
    disc = build_network(disc_spec, seed=_seed_int(ss_disc))
    rng = np.random.default_rng(ss_loop)
    adam_d = Adam(disc.parameters(), config.learning_rate,
                  config.beta1, config.beta2, config.adam_eps)
    adam_g = Adam(gen.parameters(), config.learning_rate,
                  config.beta1, config.beta2, config.adam_eps)
    d_loss_fn, g_loss_fn = _losses(config.objective, config.saturating_g)
    B = config.batch_size
    dvs = np.concatenate([np.tile(one_hot(d, K_d), (B, 1)) for d in range(K_d)])

    def step_fn(step, trace):
        reals = []
        for dom in domains:
            idx = rng.integers(0, len(dom.samples), size=B)
            reals.append(dom.samples[idx])
        real = np.concatenate(reals)
        z = rng.uniform(-1.0, 1.0, size=(K_d * B, gen_spec.noise_dim))
        return _update_pair(gen, disc, z, real, dvs, dvs, None, None,
                            d_loss_fn, g_loss_fn, adam_d, adam_g, step, trace)

    return _run_loop(config, gen, disc, step_fn, metric_fn, extra_meta)


def train_multi_info(config: TrainConfig, source, target, gen_spec: NetworkSpec,
                     disc_spec: NetworkSpec, metric_fn=None,
                     extra_meta=None) -> TrainResult:
    """2-step alternating training; labels exist only for the source domain.

    Domain index 0 is the source, index 1 the target.
    """
    if source.labels is None:
        raise DatasetError("source domain must carry labels")
    if getattr(target, "labels", None) is not None:
        raise DatasetError("target domain must not carry labels")
    if len(source.samples) == 0 or len(target.samples) == 0:
        raise DatasetError("empty domain")
    K_d = gen_spec.domain_count
    K_l = gen_spec.label_count
    if K_l < 1:
        raise DatasetError("multi-info specs need label_count >= 1")
    if int(source.labels.max()) >= K_l:
        raise DatasetError("source label outside label_count range")

    root = np.random.SeedSequence(config.seed)
    ss_gen, ss_disc, ss_loop = root.spawn(3)
    gen = build_network(gen_spec, seed=_seed_int(ss_gen))
    disc = build_network(disc_spec, seed=_seed_int(ss_disc))
    rng = np.random.default_rng(ss_loop)
    adam_d = Adam(disc.parameters(), config.learning_rate,
                  config.beta1, config.beta2, config.adam_eps)
    adam_g = Adam(gen.parameters(), config.learning_rate,
                  config.beta1, config.beta2, config.adam_eps)
    d_loss_fn, g_loss_fn = _losses(config.objective, config.saturating_g)
    B = config.batch_size
    eye_l = np.eye(K_l)
    dv_domain = np.concatenate([np.tile(one_hot(0, K_d), (B, 1)),
                                np.tile(one_hot(1, K_d), (B, 1))])
    zeros_l_2B = np.zeros((2 * B, K_l))
    zeros_d_B = np.zeros((B, K_d))

    def step_fn(step, trace):
        if schedule_kind(step, config.tau) == "label_step":
            idx = rng.integers(0, len(source.samples), size=B)
            real = source.samples[idx]
            lv = eye_l[source.labels[idx]]
            z = rng.uniform(-1.0, 1.0, size=(B, gen_spec.noise_dim))
            return _update_pair(gen, disc, z, real, zeros_d_B, zeros_d_B,
                                lv, lv, d_loss_fn, g_loss_fn,
                                adam_d, adam_g, step, trace)
        idx_s = rng.integers(0, len(source.samples), size=B)
        idx_t = rng.integers(0, len(target.samples), size=B)
        real = np.concatenate([source.samples[idx_s], target.samples[idx_t]])
        z = rng.uniform(-1.0, 1.0, size=(2 * B, gen_spec.noise_dim))
        return _update_pair(gen, disc, z, real, dv_domain, dv_domain,
                            zeros_l_2B, zeros_l_2B, d_loss_fn, g_loss_fn,
                            adam_d, adam_g, step, trace)

    return _run_loop(config, gen, disc, step_fn, metric_fn, extra_meta)


def select_checkpoint(metrics: list, metric_name: str, mode: str = "min") -> int:
    """Best checkpoint id by a recorded metric; ties go to the earliest."""
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    rows = [r for r in metrics
            if "checkpoint_id" in r and r.get(metric_name) is not None]
    if not rows:
        raise ValueError("no checkpointed metric rows to select from")
    sign = 1.0 if mode == "min" else -1.0
    best = min(rows, key=lambda r: (sign * r[metric_name], r["checkpoint_id"]))
    return best["checkpoint_id"]


def _seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint64)[0])
