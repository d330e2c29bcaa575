"""Acceptance gate: numeric oracle, closed forms, structure, schedule,
training targets and determinism.

The three training criteria each run three fixed seeds and require at least
two successes; every run prints its per-seed outcome so a failure is
diagnosable from the pytest log alone.
"""
import json
import time

import numpy as np
import pytest

from aligngan import autodiff as ad
from aligngan import checkpoint as ckpt
from aligngan import evaluation, experiments, gradcheck, pgm
from aligngan.autodiff import Tape, backward
from aligngan.config import ExperimentConfig
from aligngan.datasets import parse_idx, write_idx
from aligngan.networks import (BuildError, LayerSpec, NetworkSpec,
                               build_discriminator, build_generator, forward,
                               mlp_discriminator_spec, mlp_generator_spec,
                               one_hot)
from aligngan.objectives import (ObjectiveKind, gan_d_loss, lsgan_d_loss,
                                 lsgan_g_loss)
from aligngan.training import (TrainConfig, schedule_kind, select_checkpoint,
                               train_multi_info)
from aligngan.datasets import Domain, glyph_dataset


class TestCriterion1GradientOracle:
    def test_suite_passes_within_time_budget(self):
        start = time.monotonic()
        lines = []
        ok = gradcheck.run(seed=0, report=lines.append)
        elapsed = time.monotonic() - start
        print(f"\n[criterion 1] gradcheck {'PASS' if ok else 'FAIL'} "
              f"in {elapsed:.1f}s")
        for line in lines:
            print(" ", line)
        assert ok, "gradient oracle failures:\n" + "\n".join(lines)
        assert elapsed < 60.0


class TestCriterion2ClosedFormLosses:
    def _t(self, *vals):
        tape = Tape()
        return [tape.leaf(np.asarray(v, dtype=np.float64)) for v in vals]

    def test_lsgan_perfect_discriminator(self):
        dr, df = self._t([1.0], [-1.0])
        assert abs(float(lsgan_d_loss(dr, df).data)) <= 1e-12

    def test_lsgan_generator_at_target(self):
        (df,) = self._t([0.0])
        assert abs(float(lsgan_g_loss(df).data)) <= 1e-12

    def test_lsgan_scores_at_zero(self):
        dr, df = self._t([0.0], [0.0])
        assert abs(float(lsgan_d_loss(dr, df).data) - 1.0) <= 1e-12

    def test_regular_gan_maximum_confusion(self):
        dr, df = self._t([0.5], [0.5])
        val = float(gan_d_loss(dr, df).data)
        assert abs(val - 2.0 * np.log(2.0)) <= 1e-9


class TestCriterion3StructuralRules:
    def test_generator_first_layer_excludes_domain_from_fan_in(self):
        gen = build_generator(mlp_generator_spec(noise_dim=4), seed=0)
        assert gen.layers[0].weight.shape[0] == 4

    def test_discriminator_first_layer_includes_domain_in_fan_in(self):
        disc = build_discriminator(
            mlp_discriminator_spec(in_dim=2, domain_count=2), seed=0)
        assert disc.layers[0].weight.shape[0] == 4

    def test_rule_violating_generator_rejected(self):
        spec = NetworkSpec(
            role="generator", noise_dim=4,
            layers=(LayerSpec("dense", 8, inject_domain=True),
                    LayerSpec("dense", 2)))
        with pytest.raises(BuildError):
            build_generator(spec, seed=0)

    def test_rule_violating_discriminator_rejected(self):
        spec = NetworkSpec(
            role="discriminator", image_shape=(2,),
            layers=(LayerSpec("dense", 8), LayerSpec("dense", 1)))
        with pytest.raises(BuildError):
            build_discriminator(spec, seed=0)


class TestCriterion4AlternatingSchedule:
    def test_exactly_250_label_steps(self):
        label_steps = [s for s in range(1000)
                       if schedule_kind(s, 4) == "label_step"]
        assert len(label_steps) == 250
        assert label_steps == list(range(0, 1000, 4))

    def test_zero_masked_channels_get_exactly_zero_gradients(self):
        gen = build_generator(
            mlp_generator_spec(noise_dim=4, label_count=3, hidden=(8, 8)),
            seed=0)
        z = np.random.default_rng(0).uniform(-1, 1, (16, 4))
        # label step: label active, domain vector deliberately all-zero
        tape = Tape()
        out = forward(gen, z, domain=np.zeros(2), label=one_hot(1, 3),
                      tape=tape)
        gmap = backward(tape, ad.mean(ad.square(out)))
        leaves = gen.bind(tape)
        checked = 0
        for i, layer in enumerate(gen.layers):
            g = gmap[leaves[f"layer{i}.weight"].node_id]
            if layer.domain is not None:
                assert np.all(g[layer.domain] == 0.0)
                checked += 1
            if layer.label is not None:
                assert np.any(g[layer.label] != 0.0)
        assert checked > 0
        # domain step: mirrored masking
        tape = Tape()
        out = forward(gen, z, domain=one_hot(0, 2), label=np.zeros(3),
                      tape=tape)
        gmap = backward(tape, ad.mean(ad.square(out)))
        leaves = gen.bind(tape)
        for i, layer in enumerate(gen.layers):
            g = gmap[leaves[f"layer{i}.weight"].node_id]
            if layer.label is not None:
                assert np.all(g[layer.label] == 0.0)
            if layer.domain is not None:
                assert np.any(g[layer.domain] != 0.0)


def _count_passes(outcomes, label):
    passed = sum(1 for _, ok, _ in outcomes if ok)
    for seed, ok, detail in outcomes:
        print(f"[{label}] seed {seed}: {'pass' if ok else 'FAIL'} ({detail})")
    return passed


class TestCriterion5ToyAlignment:
    def test_negation_2d_correlation(self):
        start = time.monotonic()
        outcomes = []
        print()
        for seed in (0, 1, 2):
            cfg = ExperimentConfig(
                task="negation_2d", objective="lsgan", learning_rate=0.0005,
                batch_size=64, total_steps=8000, seed=seed, noise_dim=4,
                hidden=(32, 32), dataset_size=4096, metric_every=1000,
                checkpoint_every=1000)
            res = experiments.run_experiment(cfg)
            best = select_checkpoint(res.metrics, "alignment_correlation",
                                     mode="max")
            gen, _, _ = ckpt.loads(dict(res.checkpoints)[best])
            z = np.random.default_rng(9999 + seed).uniform(
                -1, 1, (1000, cfg.noise_dim))
            pairs = evaluation.aligned_pairs(gen, z)
            r = evaluation.alignment_correlation(pairs, np.negative)
            outcomes.append((seed, r > 0.8, f"corr {r:.3f} @ step {best}"))
        elapsed = time.monotonic() - start
        passed = _count_passes(outcomes, "criterion 5")
        print(f"[criterion 5] {passed}/3 seeds in {elapsed:.0f}s")
        assert passed >= 2
        assert elapsed < 600.0


class TestCriterion6GlyphNegation:
    def test_negation_consistency(self):
        start = time.monotonic()
        outcomes = []
        print()
        for seed in (0, 1, 2):
            cfg = ExperimentConfig(
                task="glyph_negative", objective="regular_gan",
                learning_rate=0.0002, batch_size=64, total_steps=16000,
                seed=seed, noise_dim=4, base_channels=16, class_count=3,
                jitter=0.05, dataset_size=2048, metric_every=1000,
                checkpoint_every=1000)
            res = experiments.run_experiment(cfg)
            step0 = res.metrics[0]["negation_consistency"]
            best = select_checkpoint(res.metrics, "negation_consistency",
                                     mode="min")
            gen, _, _ = ckpt.loads(dict(res.checkpoints)[best])
            z = np.random.default_rng(9999 + seed).uniform(
                -1, 1, (256, cfg.noise_dim))
            value = evaluation.negation_consistency(
                evaluation.aligned_pairs(gen, z))
            ok = value < 0.3 and value < step0
            outcomes.append(
                (seed, ok, f"consistency {value:.3f} @ step {best}, "
                           f"step-0 {step0:.3f}"))
        elapsed = time.monotonic() - start
        passed = _count_passes(outcomes, "criterion 6")
        print(f"[criterion 6] {passed}/3 seeds in {elapsed:.0f}s")
        assert passed >= 2
        assert elapsed < 1200.0


class TestCriterion7LabelPropagation:
    def test_multi_info_accuracy(self):
        start = time.monotonic()
        outcomes = []
        print()
        for seed in (0, 1, 2):
            cfg = ExperimentConfig(
                task="multi_info_glyph", objective="regular_gan",
                learning_rate=0.0002, batch_size=64, total_steps=6000,
                tau=4, seed=seed, noise_dim=16, base_channels=16,
                class_count=3, jitter=0.1, dataset_size=2048,
                metric_every=1000, checkpoint_every=1000)
            res = experiments.run_experiment(cfg)
            best = select_checkpoint(res.metrics, "label_propagation_accuracy",
                                     mode="max")
            gen, _, _ = ckpt.loads(dict(res.checkpoints)[best])
            eval_x, eval_l = experiments.eval_glyph_target_data(
                seed + 5000, cfg.class_count, cfg.jitter)
            acc = evaluation.label_propagation_accuracy(
                gen, eval_x, eval_l, cfg.class_count, per_class_count=40,
                seed=9999 + seed)
            outcomes.append((seed, acc > 0.7, f"accuracy {acc:.3f} @ {best}"))
        elapsed = time.monotonic() - start
        passed = _count_passes(outcomes, "criterion 7")
        print(f"[criterion 7] {passed}/3 seeds in {elapsed:.0f}s")
        assert passed >= 2
        assert elapsed < 1800.0


class TestCriterion8DeterminismAndFormats:
    def _run(self):
        cfg = ExperimentConfig(task="negation_2d", objective="lsgan",
                               total_steps=32, batch_size=8, hidden=(8, 8),
                               dataset_size=64, metric_every=16,
                               checkpoint_every=16, seed=11)
        return experiments.run_experiment(cfg)

    def test_bitwise_identical_runs(self):
        a, b = self._run(), self._run()
        assert a.metrics_jsonl() == b.metrics_jsonl()
        assert [s for s, _ in a.checkpoints] == [s for s, _ in b.checkpoints]
        for (_, blob_a), (_, blob_b) in zip(a.checkpoints, b.checkpoints):
            assert blob_a == blob_b

    def test_p5_grid_deterministic(self):
        res = self._run()
        gen, _, _ = ckpt.loads(res.checkpoints[-1][1])
        z = np.random.default_rng(5).uniform(-1, 1, (16, 4))
        grids = []
        for _ in range(2):
            a, b = evaluation.aligned_pairs(gen, z)
            grids.append(pgm.to_bytes(pgm.pair_grid(a, b, 4, 4)))
        assert grids[0] == grids[1]

    def test_idx_round_trip_exact(self):
        rng = np.random.default_rng(0)
        u8 = rng.integers(0, 256, size=(7, 8, 8)).astype(np.uint8)
        x = u8 / 127.5 - 1.0
        raw = write_idx(x, kind="u8")
        np.testing.assert_array_equal(write_idx(parse_idx(raw), kind="u8"), raw)
        f = rng.normal(size=(3, 4)).astype(np.float32).astype(np.float64)
        np.testing.assert_array_equal(parse_idx(write_idx(f, kind="f32")), f)

    def test_checkpoint_round_trip_exact(self):
        res = self._run()
        _, blob = res.checkpoints[-1]
        gen, disc, meta = ckpt.loads(blob)
        assert ckpt.dump(gen, disc, meta=meta) == blob
