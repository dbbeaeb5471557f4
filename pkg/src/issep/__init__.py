"""Multichannel blind source separation and joint dereverberation toolkit."""

from .core import (
    DemixState,
    StackedObservation,
    background_estimates,
    build_stacked,
    demix,
    init_demix,
    projection_back,
)
from .iss import (
    CovariancePair,
    IssConfig,
    auxiva_iss,
    background_update,
    effective_demixer,
    eval_cost,
    iss_sweep,
    observation_covariances,
    regularized_solve,
    separate,
    steering_vector,
    weighted_normal_system,
)
from .metrics import EvalReport, evaluate, permutation_align
from .models import SourceModel
from .simulate import MixtureScene, make_scene, oracle_images
from .stft import (
    MultichannelSpectrogram,
    StftConfig,
    Waveform,
    istft,
    read_wav,
    stft,
    write_wav,
)
from .wpe import WpeFilter, wpe_dereverb

__version__ = "0.1.0"

__all__ = [
    "CovariancePair",
    "DemixState",
    "EvalReport",
    "IssConfig",
    "MixtureScene",
    "MultichannelSpectrogram",
    "SourceModel",
    "StackedObservation",
    "StftConfig",
    "Waveform",
    "WpeFilter",
    "auxiva_iss",
    "background_estimates",
    "background_update",
    "build_stacked",
    "demix",
    "effective_demixer",
    "eval_cost",
    "evaluate",
    "init_demix",
    "iss_sweep",
    "istft",
    "make_scene",
    "observation_covariances",
    "oracle_images",
    "permutation_align",
    "projection_back",
    "read_wav",
    "regularized_solve",
    "separate",
    "steering_vector",
    "stft",
    "weighted_normal_system",
    "wpe_dereverb",
    "write_wav",
]
