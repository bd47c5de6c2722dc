"""Sparse frequency-domain channel sounding.

Nonuniform frequency sampling schemes (uniform, coprime, nested and
parabolic), a spatio-frequency channel model with molecular absorption,
single-path likelihood diagnostics, and SAGE / likelihood-rectified SAGE
multipath extraction.
"""

from .absorption import AbsorptionLine, AbsorptionModel, default_synthetic_model
from .analysis import (ChannelStats, CirProfile, adjoint_nudft_cir, cdf, channel_stats,
                       delay_rmse, pdap, pick_cir_peaks)
from .channel import (AntennaPattern, MeasurementSet, PathParams, SoundingModel, antenna_gain,
                      steering_vector, synthesize, table_one_paths)
from .estimator import EstimateSet, SageConfig, SageEstimator, e_step, estimate_amplitude, m_step, run
from .likelihood import (LikelihoodProfile, SidelobePrediction, empirical_udr, mainlobe_width,
                         poisson_component, predict_sidelobe_bands, profile, rectified_profile,
                         sidelobe_metrics)
from .sampling import (FrequencyGrid, gen_cfs, gen_cfs_auto, gen_nfs, gen_nfs_auto, gen_pfs,
                       gen_ufs, local_step, local_steps, make_grid, predicted_udr)

__version__ = "0.1.0"

__all__ = [
    "AbsorptionLine", "AbsorptionModel", "default_synthetic_model",
    "ChannelStats", "CirProfile", "adjoint_nudft_cir", "cdf", "channel_stats", "delay_rmse",
    "pdap", "pick_cir_peaks",
    "AntennaPattern", "MeasurementSet", "PathParams", "SoundingModel", "antenna_gain",
    "steering_vector", "synthesize", "table_one_paths",
    "EstimateSet", "SageConfig", "SageEstimator", "e_step", "estimate_amplitude", "m_step", "run",
    "LikelihoodProfile", "SidelobePrediction", "empirical_udr", "mainlobe_width",
    "poisson_component", "predict_sidelobe_bands", "profile", "rectified_profile",
    "sidelobe_metrics",
    "FrequencyGrid", "gen_cfs", "gen_cfs_auto", "gen_nfs", "gen_nfs_auto", "gen_pfs", "gen_ufs",
    "local_step", "local_steps", "make_grid", "predicted_udr",
]
