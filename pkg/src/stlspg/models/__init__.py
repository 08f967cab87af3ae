"""Parameterized full-order models."""
from .base import EvaluationCounter, FiniteVolumeModel, NonphysicalStateError, SemiDiscreteModel
from .burgers import BurgersModel, burgers_model, godunov_flux, godunov_flux_derivatives
from .nozzle import (
    EulerNozzleModel,
    NozzleGeometry,
    euler_initial_condition,
    euler_nozzle_model,
    nozzle_geometry,
    roe_flux,
)


def make_model(name, **kwargs):
    """Build a model by label (``"burgers"`` or ``"euler"``)."""
    key = name.lower()
    if key == "burgers":
        return BurgersModel(**kwargs)
    if key in ("euler", "nozzle", "euler_nozzle"):
        return EulerNozzleModel(**kwargs)
    raise KeyError(f"unknown model {name!r}")
