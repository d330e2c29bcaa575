"""Adversarial losses: regular GAN (log form) and least-squares GAN.

The least-squares variant uses the fixed targets fake=-1, real=+1,
generator-target=0, the parameter choice that minimizes a Pearson chi-square
divergence.  Regular-GAN losses expect post-sigmoid scores in (0, 1);
least-squares losses expect raw (unsquashed) scores.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import autodiff as ad
from .autodiff import Tensor

EPS_LOG = 1e-7

LSGAN_FAKE_TARGET = -1.0
LSGAN_REAL_TARGET = 1.0
LSGAN_GEN_TARGET = 0.0


@dataclass(frozen=True)
class ObjectiveKind:
    kind: str  # "regular_gan" | "lsgan"

    def __post_init__(self):
        if self.kind not in ("regular_gan", "lsgan"):
            raise ValueError(f"unknown objective {self.kind!r}")

    @property
    def squash_scores(self) -> bool:
        """Regular GAN scores pass through a sigmoid; LSGAN scores stay raw."""
        return self.kind == "regular_gan"


def gan_d_loss(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """-mean(log d_real) - mean(log(1 - d_fake)), eps-clamped logs."""
    real_term = ad.mean(ad.log(d_real, EPS_LOG))
    fake_term = ad.mean(ad.log(ad.shift(ad.scale(d_fake, -1.0), 1.0), EPS_LOG))
    return ad.scale(ad.add(real_term, fake_term), -1.0)


def gan_g_loss(d_fake: Tensor, saturating: bool = False) -> Tensor:
    """Non-saturating by default: -mean(log d_fake).

    The saturating textbook form mean(log(1 - d_fake)) is kept available but
    stalls on fresh generators, so it is not the default.
    """
    if saturating:
        return ad.mean(ad.log(ad.shift(ad.scale(d_fake, -1.0), 1.0), EPS_LOG))
    return ad.scale(ad.mean(ad.log(d_fake, EPS_LOG)), -1.0)


def lsgan_d_loss(d_real: Tensor, d_fake: Tensor) -> Tensor:
    """0.5*mean((d_real - 1)^2) + 0.5*mean((d_fake + 1)^2)."""
    real_term = ad.mean(ad.square(ad.shift(d_real, -LSGAN_REAL_TARGET)))
    fake_term = ad.mean(ad.square(ad.shift(d_fake, -LSGAN_FAKE_TARGET)))
    return ad.scale(ad.add(real_term, fake_term), 0.5)


def lsgan_g_loss(d_fake: Tensor) -> Tensor:
    """0.5*mean(d_fake^2)."""
    return ad.scale(ad.mean(ad.square(ad.shift(d_fake, -LSGAN_GEN_TARGET))), 0.5)
