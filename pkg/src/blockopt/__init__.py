"""Two-block proximal descent and ADMM solvers with trace-based convergence certificates."""

from .admm import AdmmConfig, AdmmProblem, run_admm
from .bcd import BcdConfig, BcdProblem, run_bcd
from .core import BlockPair, LinOp, block_norm, make_rng, op_norm_estimate, random_instance
from .errors import (
    BlockoptError,
    DimensionError,
    InfeasibleError,
    ParameterError,
    PreconditionError,
    SolverError,
    SubproblemError,
    UnsupportedError,
)
from .problems import ProblemSpec, builtin, load_problem
from .prox import L1, INFINITE, IndBox, IndNonneg, SqL2, Zero, prox

__version__ = "0.1.0"
