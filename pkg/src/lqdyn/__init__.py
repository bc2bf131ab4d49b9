# __init__.py
"""Learning dynamical systems as linear-quadratic operators plus small
residual networks, with a residual gate that keeps components analytic
when the operators alone explain the data."""

from . import (cli, dynsys, errors, features, model, neural, opinf, optim,
               reduce)
from .dynsys import (DerivativeSamples, FhnParams, GlyParams, Trajectory,
                     default_glycolysis_params, integrate, rhs_fhn,
                     rhs_glycolysis, sample_initial_conditions,
                     stencil_derivatives)
from .features import (QuadIndexMap, RegressionDataset, Standardization,
                       build_dataset, expand_q_row, kron_square,
                       quad_monomials)
from .model import (LQModel, Metrics, evaluate, load_model, model_rhs,
                    save_model, simulate_discrete, simulate_model,
                    step_discrete)
from .neural import (ComponentModel, GradientBundle, ResNetParams, elu,
                     elu_prime, init_params, loss_and_grads, lqres_predict,
                     resnet_forward)
from .opinf import (GateDecision, LinQuadOps, ResidualReport, fit_linquad,
                    gate_component, residual_stats)
from .optim import HyperParams, OptState, TrainHistory, radam_update, \
    train_component
from .reduce import PODBasis, lift, pod_basis, project

__version__ = "0.1.0"
