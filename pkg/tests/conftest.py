import numpy as np
import pytest

from aegan import data
from aegan.losses import ReconWeights
from aegan.networks import ModelConfig
from aegan.training import TrainingConfig


@pytest.fixture(scope="session")
def ring_dataset():
    return data.make_gaussian_mixture(
        data.MixtureSpec(n_modes=8, radius=2.0, mode_std=0.02,
                         samples_per_mode=128), seed=100)


@pytest.fixture
def tiny_model_config():
    return ModelConfig(generator_widths=(16,), encoder_widths=(16,),
                       sample_discriminator_widths=(16,),
                       latent_discriminator_widths=(16,))


def quick_config(**overrides):
    base = dict(mode="aegan", batch_size=8, total_steps=40, d_z=4,
                recon_weights=ReconWeights(5.0, 0.5),
                learning_rate_g_e=1e-3, learning_rate_d=1e-3,
                seed=0, checkpoint_every=20, log_every=5)
    base.update(overrides)
    return TrainingConfig(**base)


@pytest.fixture
def make_config():
    return quick_config
