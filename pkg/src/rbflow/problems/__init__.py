from .base import Problem
from .simplex import (SimplexDomain, sample_simplex_boundary,
                      sample_simplex_interior, simplex_vertices)
from .convection import ConvectionDiffusion, analytic_example1
from .burgers import Burgers2D, BurgersSeries, analytic_example2
from .vlasov import (VlasovSwarm, morse_potential, morse_potential_grad)
from .fitting import FitResult, ic_fit, latin_hypercube

__all__ = [
    "Problem", "SimplexDomain", "simplex_vertices",
    "sample_simplex_interior", "sample_simplex_boundary",
    "ConvectionDiffusion", "analytic_example1",
    "Burgers2D", "BurgersSeries", "analytic_example2",
    "VlasovSwarm", "morse_potential", "morse_potential_grad",
    "FitResult", "ic_fit", "latin_hypercube",
]
