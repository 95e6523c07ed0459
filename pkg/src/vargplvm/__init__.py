"""Variational Bayesian GP-LVM: sparse collapsed bound, dynamical and
uncertain-input priors, predictions and semi-supervised regression."""
from .bound import OutputData, lower_bound, value_and_grad
from .errors import ArgumentError, CapabilityError, DataFileError, NumericalError, StateError
from .kernels import Bias, LinearArd, Matern32, PeriodicRbf, RbfArd, Sum, White, parse_kernel
from .model import Model
from .predict import (InferConfig, forecast, infer_latent, iterative_predict, log_density,
                      predict_moments, reconstruct)
from .psi import psi_statistics
from .training import TrainConfig, ard_report, fit, initialize, train
from .variational import DynamicalQ, FactorizedQ, LatentPrior

__version__ = "0.1.0"
