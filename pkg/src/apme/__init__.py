"""Numerical study of the anisotropic porous medium equation u_t = sum_i (u^{m_i})_{x_i x_i}."""
from .exponents import Exponents, HypothesisError, MediumParams, derive_exponents, exponent_table
from .grid import Field, Grid, lp_norm, sample, total_mass
from .profile import Profile, ProfileOptions, barenblatt, compute_profile, make_admissible, rescale_mass
from .rescale import RescaleMap, evolve_rescaled, from_selfsimilar, step_rescaled, to_selfsimilar
from .solver import SolverConfig, evolve, stable_dt, step
from .support import SupportSet, extract_support, hausdorff, radius_function

__version__ = "0.1.0"

__all__ = [
    "Exponents", "HypothesisError", "MediumParams", "derive_exponents", "exponent_table",
    "Field", "Grid", "lp_norm", "sample", "total_mass",
    "Profile", "ProfileOptions", "barenblatt", "compute_profile", "make_admissible", "rescale_mass",
    "RescaleMap", "evolve_rescaled", "from_selfsimilar", "step_rescaled", "to_selfsimilar",
    "SolverConfig", "evolve", "stable_dt", "step",
    "SupportSet", "extract_support", "hausdorff", "radius_function",
]
