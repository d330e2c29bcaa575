"""Gradient oracle suite: autodiff vs central finite differences.

Covers every op in the catalogue on random small tensors, plus both default
networks via randomly sampled parameter coordinates.  Random inputs for the
kinked ops (leaky_relu, clamped log) are kept away from the kink by more than
the probe step so the central difference is valid.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, grad_check
from .networks import (Network, build_network, default_discriminator_spec,
                       default_generator_spec, forward, one_hot)

TOLERANCE = 1e-4
PROBE_EPS = 1e-3
CASES_PER_OP = 8
NETWORK_COORDS = 120


class CheckFailure:
    def __init__(self, name, error, detail=""):
        self.name = name
        self.error = error
        self.detail = detail

    def __str__(self):
        return f"FAIL {self.name}: rel error {self.error:.3e} {self.detail}"


def _away_from_zero(rng, shape, margin=0.05):
    x = rng.uniform(margin, 1.0, size=shape)
    return x * rng.choice([-1.0, 1.0], size=shape)


def _corrupt_tanh(t):
    """tanh with a backward rule deliberately off by 1% (negative control)."""
    v = np.tanh(t.data)

    def bwd(g):
        return ((t.node_id, g * (1.0 - v * v) * 1.01),)

    return t.tape.record("tanh", v, (t.node_id,), bwd)


def _op_cases(rng, corrupt=False):
    """Yield (name, f, x) triples; f maps a leaf Tensor to a scalar."""
    tanh_fn = _corrupt_tanh if corrupt else ad.tanh

    def loss(t):
        return ad.mean(ad.square(t))

    for i in range(CASES_PER_OP):
        a_mat = rng.uniform(-1, 1, (3, 4))
        yield (f"matmul/lhs[{i}]",
               lambda t, m=a_mat: loss(ad.matmul(t, t.tape.leaf(m))),
               rng.uniform(-1, 1, (2, 3)))
        yield (f"matmul/rhs[{i}]",
               lambda t, m=a_mat: loss(ad.matmul(t.tape.leaf(m), t)),
               rng.uniform(-1, 1, (4, 3)))
        kern = rng.uniform(-1, 1, (2, 3, 2, 2))
        yield (f"conv2d/input[{i}]",
               lambda t, k=kern: loss(ad.conv2d(t, t.tape.leaf(k),
                                                stride=1, pad=1)),
               rng.uniform(-1, 1, (2, 3, 3, 3)))
        xin = rng.uniform(-1, 1, (2, 3, 3, 3))
        yield (f"conv2d/kernel[{i}]",
               lambda t, x=xin: loss(ad.conv2d(t.tape.leaf(x), t,
                                               stride=1, pad=1)),
               kern.copy())
        yield (f"transposed_conv2d/input[{i}]",
               lambda t, k=kern: loss(ad.transposed_conv2d(
                   t, t.tape.leaf(k), stride=2, pad=1)),
               rng.uniform(-1, 1, (2, 2, 2, 2)))
        yin = rng.uniform(-1, 1, (2, 2, 2, 2))
        yield (f"transposed_conv2d/kernel[{i}]",
               lambda t, y=yin: loss(ad.transposed_conv2d(
                   t.tape.leaf(y), t, stride=2, pad=1)),
               kern.copy())
        b_vec = rng.uniform(-1, 1, (4,))
        yield (f"add/broadcast[{i}]",
               lambda t, b=b_vec: loss(ad.add(t, t.tape.leaf(b))),
               rng.uniform(-1, 1, (3, 4)))
        yield (f"sub[{i}]",
               lambda t, b=b_vec: loss(ad.sub(t, t.tape.leaf(b))),
               rng.uniform(-1, 1, (3, 4)))
        yield (f"mul[{i}]",
               lambda t, b=b_vec: loss(ad.mul(t, t.tape.leaf(b))),
               rng.uniform(-1, 1, (3, 4)))
        other = rng.uniform(-1, 1, (2, 5))
        yield (f"concat[{i}]",
               lambda t, o=other: loss(ad.concat([t, t.tape.leaf(o)], axis=1)),
               rng.uniform(-1, 1, (2, 3)))
        yield (f"leaky_relu[{i}]",
               lambda t: loss(ad.leaky_relu(t, 0.2)),
               _away_from_zero(rng, (3, 4)))
        yield (f"tanh[{i}]", lambda t: loss(tanh_fn(t)),
               rng.uniform(-1, 1, (3, 4)))
        yield (f"sigmoid[{i}]", lambda t: loss(ad.sigmoid(t)),
               rng.uniform(-1, 1, (3, 4)))
        yield (f"log[{i}]", lambda t: loss(ad.log(t)),
               rng.uniform(0.1, 1.0, (3, 4)))
        yield (f"square[{i}]", lambda t: loss(ad.square(t)),
               rng.uniform(-1, 1, (3, 4)))
        yield (f"mean[{i}]", lambda t: ad.square(ad.mean(t)),
               rng.uniform(-1, 1, (3, 4)))
        yield (f"reshape[{i}]", lambda t: loss(ad.reshape(t, (4, 3))),
               rng.uniform(-1, 1, (3, 4)))
        yield (f"narrow[{i}]", lambda t: loss(ad.narrow(t, 1, 1, 2)),
               rng.uniform(-1, 1, (3, 4)))
        yield (f"rsqrt[{i}]", lambda t: loss(ad.rsqrt(t)),
               rng.uniform(0.2, 1.0, (3, 4)))


def check_ops(seed: int = 0, corrupt: bool = False):
    """Run every per-op oracle case; returns (results, failures)."""
    rng = np.random.default_rng(seed)
    results = []
    failures = []
    for name, f, x in _op_cases(rng, corrupt):
        err = grad_check(f, x, eps=PROBE_EPS)
        results.append((name, err))
        if err > TOLERANCE:
            failures.append(CheckFailure(name, err))
    return results, failures


def _network_loss(net: Network, x, domain):
    tape = Tape()
    out = forward(net, x, domain=domain, tape=tape)
    return tape, ad.mean(ad.square(out))


def check_network(net: Network, seed: int, n_coords: int = NETWORK_COORDS):
    """Compare autodiff parameter gradients against central differences at
    randomly sampled parameter coordinates."""
    rng = np.random.default_rng(seed)
    B = 4
    if net.spec.role == "generator":
        x = rng.uniform(-1, 1, (B, net.spec.noise_dim))
    else:
        x = rng.uniform(-1, 1, (B,) + tuple(net.spec.image_shape))
    domain = np.stack([one_hot(int(d), net.spec.domain_count)
                       for d in rng.integers(0, net.spec.domain_count, B)])

    tape, loss = _network_loss(net, x, domain)
    gmap = ad.backward(tape, loss)
    leaves = net.bind(tape)
    params = net.parameters()
    names = sorted(params)
    failures = []
    worst = 0.0

    def probe(arr, idx, eps):
        flat = arr.reshape(-1)
        old = flat[idx]
        flat[idx] = old + eps
        hi = float(_network_loss(net, x, domain)[1].data)
        flat[idx] = old - eps
        lo = float(_network_loss(net, x, domain)[1].data)
        flat[idx] = old
        return (hi - lo) / (2 * eps)

    for _ in range(n_coords):
        name = names[int(rng.integers(0, len(names)))]
        arr = params[name]
        idx = int(rng.integers(0, arr.size))
        a = gmap.get(leaves[name].node_id, np.zeros_like(arr)).reshape(-1)[idx]
        # a coarse probe can cross a leaky-relu kink or pick up curvature
        # error; refine before declaring a mismatch (a wrong backward rule
        # fails at every probe width)
        for eps in (PROBE_EPS, PROBE_EPS / 10, PROBE_EPS / 50):
            fd = probe(arr, idx, eps)
            err = abs(a - fd) / max(1.0, abs(fd))
            if err <= TOLERANCE:
                break
        worst = max(worst, err)
        if err > TOLERANCE:
            failures.append(CheckFailure(
                f"{net.spec.role}/{name}[{idx}]", err,
                f"(autodiff {a:.10e}, central diff {fd:.10e})"))
    return worst, failures


def run(seed: int = 0, corrupt: bool = False, report=print) -> bool:
    """Full oracle suite; returns True iff everything is within tolerance."""
    results, failures = check_ops(seed, corrupt)
    op_worst = max(err for _, err in results)
    report(f"ops: {len(results)} cases, worst rel error {op_worst:.3e}")
    gen = build_network(default_generator_spec(), seed=seed + 1)
    disc = build_network(default_discriminator_spec(), seed=seed + 2)
    for net in (gen, disc):
        worst, net_failures = check_network(net, seed + 3)
        failures.extend(net_failures)
        report(f"{net.spec.role}: {NETWORK_COORDS} coordinates, "
               f"worst rel error {worst:.3e}")
    for f in failures:
        report(str(f))
    ok = not failures
    report("gradcheck: PASS" if ok else "gradcheck: FAIL")
    return ok
