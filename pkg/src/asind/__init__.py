"""Alternating sparse identification of network dynamics."""
from .basis import BasisLibrary, default_library, load_library
from .dynamics import DivergenceError, DynamicsSpec, Trajectory, estimate_derivatives, integrate_rk4
from .identify import AsindConfig, IdentifiedModel, SolverState, fit, predict
from .metrics import MetricsReport, evaluate_run, jaccard, mape, rmse
from .netgen import AdjacencyMatrix, NetworkConfig, gen_ba_scale_free, gen_er, gen_ws
from .qpsolver import QpProblem, QpSolution, kkt_residual, solve_nn_qp
from .sindy import SindyModel, fit_sindy, predict_sindy

__version__ = "0.1.0"
