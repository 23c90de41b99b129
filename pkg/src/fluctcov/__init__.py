"""Low-rank stationary covariances of linearised stochastic reaction-diffusion equations."""

__version__ = "0.1.0"

from .errors import DomainError, FluctcovError, SolverError, StabilityError
from .elliptic import (EllipticData, complete_K, complete_K_kprime, incomplete_s,
                       jacobi_dn, jacobi_dn_kprime, modulus_from_nome, nome_from_K)
from .linalg import (SpectralInterval, dense_lyapunov, shifted_solve, spectral_interval,
                     spectral_norm, sym_eig, truncated_svd_of_factor)
from .discretize import (DiscretizedSystem, Nonlinearity, ProblemSpec, build_laplacian_1d,
                         discretize, newton_steady_state)
from .lradi import (LowRankSolution, ShiftSet, ThetaTable, lr_adi_run, theoretical_error_bound,
                    theta_bound, wachspress_shifts)
from .bounds import (DecayReport, decay_rate_H, decay_rate_spectral, penzl_bound, sabino_bound,
                     verify_decay)
from .mc import (CovarianceTrajectory, EtaIngredients, SimConfig, estimate_eta,
                 linearization_gap, ode_covariance, simulate_coupled, simulate_linear,
                 simulate_nonlinear)
from .ceres import CeresBudget, OrderStudy, assemble_budget, galerkin_order_study
