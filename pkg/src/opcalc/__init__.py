"""Contour-calculus toolkit for functions of one and two complex matrices.

Submodules are imported lazily so the CLI can cap BLAS threads before numpy
loads; ``from opcalc import funm`` etc. still works.
"""

import importlib

__version__ = "0.1.0"

_EXPORTS = {
    "ComplexMatrix": "numcore",
    "TransformatorMatrix": "numcore",
    "resolvent": "numcore",
    "eigenvalues": "numcore",
    "kron_lift": "numcore",
    "perturbed_inverse": "numcore",
    "vec": "numcore",
    "unvec": "numcore",
    "multiset_match_distance": "numcore",
    "SpectralEnclosure": "contour",
    "Contour": "contour",
    "QuadratureResult": "contour",
    "enclosure": "contour",
    "points_enclosure": "contour",
    "envelope": "contour",
    "integrate": "contour",
    "HoloFun1": "holofun",
    "HoloFun2": "holofun",
    "builtin": "holofun",
    "divided_difference": "holofun",
    "bezoutian": "holofun",
    "kernel2": "holofun",
    "separable": "holofun",
    "dd_kernel": "holofun",
    "composed": "holofun",
    "parse_fun1": "holofun",
    "parse_fun2": "holofun",
    "CalculusOptions": "calculus",
    "funm": "calculus",
    "funm_family": "calculus",
    "boxtimes": "calculus",
    "boxdot": "calculus",
    "transformator_matrix": "calculus",
    "transformator_spectrum": "calculus",
    "compose_apply": "calculus",
    "transformator_resolvent": "calculus",
    "SylvesterProblem": "sylvester",
    "solve_sylvester": "sylvester",
    "q_apply_sign_form": "sylvester",
    "solve_stein": "sylvester",
    "riccati_differential": "sylvester",
    "QuadraticPencil": "pencil",
    "PencilFactorization": "pencil",
    "pencil_resolvent": "pencil",
    "impulse_response": "pencil",
    "impulse_response_factored": "pencil",
    "right_solvent_newton": "pencil",
    "solve_ivp": "pencil",
    "DifferentialRequest": "frechet",
    "frechet_block_oracle": "frechet",
    "frechet_exp": "frechet",
    "frechet_xexp": "frechet",
    "frechet_spectrum": "frechet",
    "inverse_frechet": "frechet",
    "perturbed_resolvent": "frechet",
    "frechet_norm_est": "frechet",
}

__all__ = sorted(_EXPORTS) + ["errors"]


def __getattr__(name):
    modname = _EXPORTS.get(name)
    if modname is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    return getattr(importlib.import_module(f".{modname}", __name__), name)
