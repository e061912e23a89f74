"""Globally coupled expanding circle maps: transfer operators, mean-field iteration and finite-N diagnostics."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:
    __version__ = "0.1.0"

from .cone import ConeParams, hilbert_beta, hilbert_beta_alt, hilbert_theta
from .density import GridDensity
from .ensemble import ParticleEnsemble, chaos_experiment, sample_product
from .foliation import invariance_certificate, straighten
from .quasi_product import JointDensity, lipschitz_report
from .sto import ProductMeasure, mean_field_map, sto_fixed_point, sto_step
from .system import CoupledMapSystem, ExpandingSiteMap, TrigCoupling, diffusive_system, estimate_datum, eval_map
from .transfer import ExpandingMap1D, invariant_density, pushforward

__all__ = [
    "ConeParams",
    "CoupledMapSystem",
    "ExpandingMap1D",
    "ExpandingSiteMap",
    "GridDensity",
    "JointDensity",
    "ParticleEnsemble",
    "ProductMeasure",
    "TrigCoupling",
    "chaos_experiment",
    "diffusive_system",
    "estimate_datum",
    "eval_map",
    "hilbert_beta",
    "hilbert_beta_alt",
    "hilbert_theta",
    "invariance_certificate",
    "invariant_density",
    "lipschitz_report",
    "mean_field_map",
    "pushforward",
    "sample_product",
    "sto_fixed_point",
    "sto_step",
    "straighten",
]
