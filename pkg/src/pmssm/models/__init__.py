"""State-space models in disturbance form."""

from .base import StateSpaceModel, as_observations, log_obs, simulate, transition
from .growth import Growth, ThetaGrowth
from .lotka_volterra import LotkaVolterra, ThetaLV, gillespie_batch, gillespie_path, gillespie_step
from .oracle import LinearGaussian, kalman_loglik
from .spline import Spline, ThetaSpline
from .sv import StochasticVolatility, ThetaSV

__all__ = [
    "StateSpaceModel",
    "as_observations",
    "log_obs",
    "simulate",
    "transition",
    "Growth",
    "ThetaGrowth",
    "LotkaVolterra",
    "ThetaLV",
    "gillespie_batch",
    "gillespie_path",
    "gillespie_step",
    "LinearGaussian",
    "kalman_loglik",
    "Spline",
    "ThetaSpline",
    "StochasticVolatility",
    "ThetaSV",
    "build_model",
]


def build_model(name: str, **options) -> StateSpaceModel:
    """Construct a shipped model by name (``sv``, ``growth``, ``spline``,
    ``lotka_volterra`` or ``lg_oracle``)."""
    key = name.lower()
    if key in ("sv", "sv_ar"):
        return StochasticVolatility(order=int(options.get("order", 1)))
    if key == "growth":
        return Growth()
    if key == "spline":
        if "delta" not in options:
            raise ValueError("spline model needs 'delta' (use 1/T)")
        return Spline(delta=float(options["delta"]))
    if key == "lotka_volterra":
        return LotkaVolterra(dt=float(options.get("dt", 1.0)))
    if key == "lg_oracle":
        return LinearGaussian()
    raise ValueError(f"unknown model {name!r}")
