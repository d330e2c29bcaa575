"""Desk-scale conditional-GAN laboratory for cross-domain alignment."""

from .autodiff import Tape, Tensor, backward, grad_check
from .networks import (ConditionVector, LayerSpec, Network, NetworkSpec,
                       build_discriminator, build_generator, forward)
from .objectives import (ObjectiveKind, gan_d_loss, gan_g_loss, lsgan_d_loss,
                         lsgan_g_loss)
from .training import (Adam, TrainConfig, schedule_kind, select_checkpoint,
                       train_aligngan, train_multi_info)

__version__ = "0.1.0"

__all__ = [
    "Tape", "Tensor", "backward", "grad_check",
    "ConditionVector", "LayerSpec", "Network", "NetworkSpec",
    "build_discriminator", "build_generator", "forward",
    "ObjectiveKind", "gan_d_loss", "gan_g_loss", "lsgan_d_loss", "lsgan_g_loss",
    "Adam", "TrainConfig", "schedule_kind", "select_checkpoint",
    "train_aligngan", "train_multi_info",
]
