"""Convolutive prediction for reverberant speaker separation.

Dereverberation by forward convolutive prediction (FCP and its combined and
multi-step variants) and weighted prediction error (WPE), MVDR beamforming on
their outputs, and a scene simulator with emulated target estimates for
evaluation.
"""
from .beamform import (
    Beamformer,
    CovarianceSet,
    apply_beamformer,
    mvdr_weights,
    nontarget_signal,
    spatial_covariance,
    steering_vector,
)
from .errors import ConfigError, ConvPredError, DataError, NumericalError
from .linpred import (
    DereverbResult,
    PredictionFilter,
    cfcp_dereverb,
    fcp_dereverb,
    fcp_filter,
    msfcp_run,
    solve_weighted_ls,
    weight_floor,
    wpe_classic,
    wpe_dereverb,
    wpe_filter,
)
from .metrics import EvalReport, resolve_permutation, si_sdr
from .simulate import (
    EstimateQuality,
    Scene,
    SceneSpec,
    emulate_estimator,
    gen_rir,
    make_scene,
    render_scene,
)
from .stft import Spectrogram, StftConfig, TimeSignal, analyze, synthesize

__version__ = "0.1.0"
