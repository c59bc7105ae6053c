"""Learn Koopman eigenpairs from irregularly sampled trajectories.

A candidate eigenpair (a, lambda) is scored by the mean squared residual of
a^H G(x_{n+1}) - exp(lambda * dt_n) a^H G(x_n) over transition pairs; the
optimal coefficients for a fixed lambda form the smallest eigenvector of a
Hermitian matrix C(alpha, beta), and lambda is found by minimizing that
smallest eigenvalue.
"""

from .config import ExperimentConfig, exp1_configs, exp2_configs
from .dictionary import Dictionary, build_monomial_dictionary, evaluate, evaluate_jacobian
from .errors import ConfigError, InputError, KoopmanError, NumericError, ParseError
from .gedmd import fit_gedmd, spectrum_report
from .landscape import SweepSpec, periodicity_defect, sweep_beta, symmetry_defect
from .optimizer import OptimConfig, cluster_spectrum, init_grid, multi_start, optimize_from
from .simulation import HarmonicOscillator, KlusSystem, TransitionDataset, read_dataset, write_dataset
from .spectral_loss import assemble_C, loss_and_gradient, precompute_gram

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Dictionary",
    "ExperimentConfig",
    "HarmonicOscillator",
    "InputError",
    "KlusSystem",
    "KoopmanError",
    "NumericError",
    "OptimConfig",
    "ParseError",
    "SweepSpec",
    "TransitionDataset",
    "assemble_C",
    "build_monomial_dictionary",
    "cluster_spectrum",
    "evaluate",
    "evaluate_jacobian",
    "exp1_configs",
    "exp2_configs",
    "fit_gedmd",
    "init_grid",
    "loss_and_gradient",
    "multi_start",
    "optimize_from",
    "periodicity_defect",
    "precompute_gram",
    "read_dataset",
    "spectrum_report",
    "sweep_beta",
    "symmetry_defect",
    "write_dataset",
]
