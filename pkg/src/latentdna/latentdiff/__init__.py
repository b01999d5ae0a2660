"""Latent denoising diffusion: schedule, UNet noise predictor, sampler, trainer."""
from .sampling import LatentStats, SamplingError, ddpm_sample
from .schedule import NoiseSchedule, build_schedule, forward_diffuse, forward_step, score_from_noise
from .training import DiffusionDivergedError, DiffusionTrainResult, noise_prediction_loss, train_diffusion
from .unet import UNet, UnetConfig, timestep_embedding

__all__ = [
    "DiffusionDivergedError", "DiffusionTrainResult", "LatentStats", "NoiseSchedule", "SamplingError",
    "UNet", "UnetConfig", "build_schedule", "ddpm_sample", "forward_diffuse", "forward_step",
    "noise_prediction_loss", "score_from_noise", "timestep_embedding", "train_diffusion",
]
