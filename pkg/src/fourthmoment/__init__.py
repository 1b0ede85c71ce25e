"""Fourth-moment theorem toolkit for multiple Wiener-Ito integrals over R^d."""
__version__ = "0.1.0"

from ._kernels import BACKEND  # noqa: E402
from .chaos_algebra import (  # noqa: E402
    ChaosExpansion,
    apply_L,
    covariance,
    deriv_gram_second_moment,
    e_dnorm2,
    e_dnorm4,
    expectation,
    moment,
    multiply,
    var_dnorm2,
)
from .chaos_eval import MCEstimate, eval_integral, grad_norm_sq, hermite, malliavin_gradient, mc_mean  # noqa: E402
from .rng import RandomStream  # noqa: E402
from .symtensor import BlockKernel, SymKernel, contract, count, inner_ambient, norm_modified, symmetrize_block  # noqa: E402

__all__ = [
    "BACKEND",
    "BlockKernel",
    "ChaosExpansion",
    "MCEstimate",
    "RandomStream",
    "SymKernel",
    "apply_L",
    "contract",
    "count",
    "covariance",
    "deriv_gram_second_moment",
    "e_dnorm2",
    "e_dnorm4",
    "eval_integral",
    "expectation",
    "grad_norm_sq",
    "hermite",
    "inner_ambient",
    "malliavin_gradient",
    "mc_mean",
    "moment",
    "multiply",
    "norm_modified",
    "symmetrize_block",
    "var_dnorm2",
]
