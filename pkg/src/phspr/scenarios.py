"""Scenario configuration, built-in presets and initial conditions.

Configs are plain dataclasses mirroring the JSON layout used by the
command line. Two physical presets ship with the toolkit: a unit wave
equation (velocity input on the left, force input on the right) and a
clamped-free Timoshenko beam driven by force and torque at the free end,
with the parameter set T = 3.4531e5 Pa, rho = 0.0643 kg/m,
EI = 37.0116 Pa m^4, I_rho = 2.1485e-6 kg m^2 on a 0.3 m domain. A scalar
single-integrator fixture exercises the whole pipeline in closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .discretize import LumpedPhs, TimoshenkoParams, WaveParams, \
    discretize_timoshenko, discretize_wave
from .errors import ValidationError
from .model import BcPhsSpec, ConstantCoefficients

__all__ = [
    "Tolerances",
    "ModelConfig",
    "DesignConfig",
    "AnalysisConfig",
    "SimulationConfig",
    "OutputConfig",
    "ScenarioConfig",
    "BEAM_PARAMS",
    "WAVE_PARAMS",
    "beam_scenario",
    "wave_scenario",
    "scalar_scenario",
    "build_plant",
    "build_continuous_spec",
    "preset_plant_builder",
    "initial_condition",
    "write_fixtures",
]

BEAM_PARAMS = TimoshenkoParams(T=3.4531e5, rho=0.0643, EI=37.0116,
                               I_rho=2.1485e-6, length=0.3)
WAVE_PARAMS = WaveParams(tension=1.0, density=1.0, length=1.0)


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used throughout the pipeline, all overridable."""

    axis_tol: float = 1e-9
    are_residual_tol: float = 1e-8
    matching_tol: float = 1e-8
    structure_tol: float = 1e-10
    spr_eps_floor: float = 1e-14
    spr_residual_tol: float = 1e-8
    separation_tol: float = 1e-6
    audit_tol_factor: float = 1e-10
    rank_rtol: float = 1e-12

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class ModelConfig:
    """Either a named builder with physical parameters or inline matrices."""

    builder: Optional[str] = None        # "wave" | "timoshenko"
    params: dict = field(default_factory=dict)
    clamped_left: bool = True
    matrices: Optional[dict] = None      # {"J": ..., "R": ..., "Q": ..., "B": ..., "h": ...}


@dataclass
class DesignConfig:
    n_c: int = 20                        # elements per state variable
    q_lqr: float = 0.1
    r_lqr: float = 1.0
    rc_alpha_grid: List[float] = field(default_factory=lambda: [10.0])


@dataclass
class AnalysisConfig:
    eval_orders: List[int] = field(default_factory=list)
    include_naive_baseline: bool = False


@dataclass
class SimulationConfig:
    dt: float = 2e-6
    t_end: float = 0.2
    initial: dict = field(default_factory=lambda: {"kind": "zero"})
    reference: Optional[List[List[float]]] = None


@dataclass
class OutputConfig:
    directory: str = "out"
    stride: int = 1


@dataclass
class ScenarioConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    design: DesignConfig = field(default_factory=DesignConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    tolerances: Tolerances = field(default_factory=Tolerances)

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        cfg = cls()
        known = {"model", "design", "analysis", "simulation", "output", "tolerances"}
        for key in data:
            if key not in known:
                raise ValidationError(key, "unknown configuration section")
        for section, target in (("model", cfg.model), ("design", cfg.design),
                                ("analysis", cfg.analysis),
                                ("simulation", cfg.simulation),
                                ("output", cfg.output)):
            sub = data.get(section, {})
            if not isinstance(sub, dict):
                raise ValidationError(section, "must be an object")
            for key, value in sub.items():
                if key not in target.__dataclass_fields__:
                    raise ValidationError(f"{section}.{key}", "unknown field")
                setattr(target, key, value)
        tol = data.get("tolerances", {})
        if not isinstance(tol, dict):
            raise ValidationError("tolerances", "must be an object")
        for key in tol:
            if key not in Tolerances.__dataclass_fields__:
                raise ValidationError(f"tolerances.{key}", "unknown field")
        cfg.tolerances = Tolerances(**{k: float(v) for k, v in tol.items()})
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(str(path), f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    def validate(self):
        m = self.model
        if m.matrices is None:
            if m.builder not in ("wave", "timoshenko"):
                raise ValidationError(
                    "model.builder", "must be 'wave' or 'timoshenko' "
                    "(or provide model.matrices)")
            allowed = {"wave": {"tension", "density", "length"},
                       "timoshenko": {"T", "rho", "EI", "I_rho", "length"}}[m.builder]
            for key, value in m.params.items():
                if key not in allowed:
                    raise ValidationError(f"model.params.{key}", "unknown parameter")
                if not (isinstance(value, (int, float)) and value > 0):
                    raise ValidationError(f"model.params.{key}",
                                          "must be strictly positive")
        else:
            for key in ("J", "R", "Q", "B"):
                if key not in m.matrices:
                    raise ValidationError(f"model.matrices.{key}", "missing matrix")
        d = self.design
        if int(d.n_c) < 1:
            raise ValidationError("design.n_c", "must be a positive integer")
        if not d.q_lqr > 0:
            raise ValidationError("design.q_lqr", "must be strictly positive")
        if not d.r_lqr > 0:
            raise ValidationError("design.r_lqr", "must be strictly positive")
        if not d.rc_alpha_grid or any(a <= 0 for a in d.rc_alpha_grid):
            raise ValidationError("design.rc_alpha_grid",
                                  "must be a non-empty list of positive reals")
        s = self.simulation
        if not s.dt > 0:
            raise ValidationError("simulation.dt", "must be strictly positive")
        if not s.t_end >= s.dt:
            raise ValidationError("simulation.t_end", "must be at least dt")
        if not isinstance(s.initial, dict) or "kind" not in s.initial:
            raise ValidationError("simulation.initial", "must be an object with a 'kind'")
        if s.initial["kind"] not in ("zero", "vector", "beam_mode"):
            raise ValidationError("simulation.initial.kind",
                                  "must be 'zero', 'vector' or 'beam_mode'")
        if int(self.output.stride) < 1:
            raise ValidationError("output.stride", "must be a positive integer")

    def flagged_eval_orders(self) -> List[int]:
        """Evaluation orders below the design order (allowed, but unusual)."""
        return [o for o in self.analysis.eval_orders if o < self.design.n_c]


def _model_params(cfg: ModelConfig):
    if cfg.builder == "wave":
        base = WAVE_PARAMS
        return WaveParams(**{**{"tension": base.tension, "density": base.density,
                                "length": base.length}, **cfg.params})
    base = BEAM_PARAMS
    return TimoshenkoParams(**{**{"T": base.T, "rho": base.rho, "EI": base.EI,
                                  "I_rho": base.I_rho, "length": base.length},
                               **cfg.params})


def build_plant(cfg: ModelConfig, order: Optional[int] = None,
                default_order: int = 20) -> LumpedPhs:
    """Lumped plant from a model config, optionally at an overridden order."""
    if cfg.matrices is not None:
        mats = cfg.matrices
        return LumpedPhs(J=np.asarray(mats["J"], dtype=float),
                         R=np.asarray(mats["R"], dtype=float),
                         Q=np.asarray(mats["Q"], dtype=float),
                         B=np.asarray(mats["B"], dtype=float),
                         h=float(mats.get("h", 1.0)))
    n = int(order if order is not None else default_order)
    params = _model_params(cfg)
    if cfg.builder == "wave":
        return discretize_wave(params, n)
    return discretize_timoshenko(params, n, clamped_left=cfg.clamped_left)


def preset_plant_builder(name: str):
    """Order -> LumpedPhs factory for a named preset."""
    if name == "wave":
        return lambda order: discretize_wave(WAVE_PARAMS, order)
    if name == "timoshenko":
        return lambda order: discretize_timoshenko(BEAM_PARAMS, order,
                                                   clamped_left=True)
    raise ValueError(f"unknown builder id {name!r}")


def build_continuous_spec(cfg: ModelConfig) -> Optional[BcPhsSpec]:
    """Continuous model behind a builder config (None for inline matrices).

    The boundary selectors realize the collocated velocity/force channels
    of the presets, for which the power balance is exactly u^T y.
    """
    if cfg.matrices is not None:
        return None
    params = _model_params(cfg)
    isq = 1.0 / math.sqrt(2.0)
    if cfg.builder == "wave":
        if callable(params.tension) or callable(params.density):
            raise ValidationError("model.params",
                                  "continuous spec export supports constant "
                                  "coefficients only")
        P1 = np.array([[0.0, 1.0], [1.0, 0.0]])
        W = isq * np.array([[-1.0, 0.0, 0.0, 1.0],
                            [0.0, 1.0, 1.0, 0.0]])
        Wt = isq * np.array([[0.0, 1.0, -1.0, 0.0],
                             [1.0, 0.0, 0.0, 1.0]])
        return BcPhsSpec(n=2, P1=P1, P0=np.zeros((2, 2)), G0=np.zeros((2, 2)),
                         L=ConstantCoefficients([params.tension,
                                                 1.0 / params.density]),
                         domain=(0.0, params.length), W=W, Wtilde=Wt)
    if any(callable(v) for v in (params.T, params.rho, params.EI, params.I_rho)):
        raise ValidationError("model.params",
                              "continuous spec export supports constant "
                              "coefficients only")
    P1 = np.array([[0.0, 1.0, 0.0, 0.0],
                   [1.0, 0.0, 0.0, 0.0],
                   [0.0, 0.0, 0.0, 1.0],
                   [0.0, 0.0, 1.0, 0.0]])
    P0 = np.array([[0.0, 0.0, 0.0, -1.0],
                   [0.0, 0.0, 0.0, 0.0],
                   [0.0, 0.0, 0.0, 0.0],
                   [1.0, 0.0, 0.0, 0.0]])
    W = isq * np.array([[-1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
                        [0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
                        [0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
                        [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0]])
    Wt = isq * np.array([[0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0],
                         [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0],
                         [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
                         [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]])
    return BcPhsSpec(n=4, P1=P1, P0=P0, G0=np.zeros((4, 4)),
                     L=ConstantCoefficients([params.T, 1.0 / params.rho,
                                             params.EI, 1.0 / params.I_rho]),
                     domain=(0.0, params.length), W=W, Wtilde=Wt)


def beam_mode_shape(plant: LumpedPhs, tip_displacement: float = 1e-3):
    """Smooth clamped-free displacement profile and the matching state.

    ``w(z) = tip * (1 - cos(pi z / 2 len))`` has zero displacement and
    slope at the clamped end and the prescribed tip displacement at the
    free end. The state carries the corresponding shear strain (with zero
    bending angle) and zero momenta, so the initial energy is purely
    elastic. Returns ``(x0, w0)`` with ``w0`` sampled on the momentum grid
    for displacement reconstruction.
    """
    if plant.builder != "timoshenko":
        raise ValueError("beam_mode initial condition requires a Timoshenko plant")
    n = plant.n_per_variable
    length = plant.domain[1] - plant.domain[0]
    h = plant.h
    mid = (np.arange(1, n + 1) - 0.5) * h
    nodes = np.arange(1, n + 1) * h
    half_wave = math.pi / (2.0 * length)
    x0 = np.zeros(plant.n_c)
    x0[:n] = tip_displacement * half_wave * np.sin(half_wave * mid)
    w0 = tip_displacement * (1.0 - np.cos(half_wave * nodes))
    return x0, w0


def initial_condition(spec: dict, plant: LumpedPhs):
    """Resolve an initial condition config into (x0, xhat0, w0)."""
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return np.zeros(plant.n_c), None, None
    if kind == "vector":
        x0 = np.asarray(spec.get("plant", []), dtype=float)
        if x0.shape != (plant.n_c,):
            raise ValidationError("simulation.initial.plant",
                                  f"must have length {plant.n_c}")
        xhat0 = spec.get("observer")
        if xhat0 is not None:
            xhat0 = np.asarray(xhat0, dtype=float)
        return x0, xhat0, None
    if kind == "beam_mode":
        tip = float(spec.get("tip_displacement", 1e-3))
        x0, w0 = beam_mode_shape(plant, tip)
        return x0, None, w0
    raise ValidationError("simulation.initial.kind", f"unknown kind {kind!r}")


def beam_scenario() -> ScenarioConfig:
    """Clamped-free beam study: 20 elements, force/torque actuation."""
    cfg = ScenarioConfig()
    cfg.model = ModelConfig(builder="timoshenko", params={}, clamped_left=True)
    cfg.design = DesignConfig(n_c=20, q_lqr=0.1, r_lqr=1.0, rc_alpha_grid=[10.0])
    cfg.analysis = AnalysisConfig(eval_orders=[20, 30], include_naive_baseline=False)
    cfg.simulation = SimulationConfig(
        dt=2e-6, t_end=0.2,
        initial={"kind": "beam_mode", "tip_displacement": 1e-3})
    cfg.output = OutputConfig(directory="out_beam", stride=20)
    return cfg


def wave_scenario() -> ScenarioConfig:
    """Unit wave equation study: 59 elements, spillover orders up to 200."""
    cfg = ScenarioConfig()
    cfg.model = ModelConfig(builder="wave", params={})
    cfg.design = DesignConfig(n_c=59, q_lqr=0.1, r_lqr=1.0,
                              rc_alpha_grid=[10.0, 1.0, 0.1])
    cfg.analysis = AnalysisConfig(eval_orders=[59, 67, 120, 200],
                                  include_naive_baseline=True)
    cfg.simulation = SimulationConfig(dt=1e-3, t_end=10.0,
                                      initial={"kind": "zero"})
    cfg.output = OutputConfig(directory="out_wave", stride=10)
    return cfg


def scalar_scenario() -> ScenarioConfig:
    """Single-integrator fixture with closed-form controller data."""
    cfg = ScenarioConfig()
    cfg.model = ModelConfig(matrices={"J": [[0.0]], "R": [[0.0]],
                                      "Q": [[1.0]], "B": [[1.0]], "h": 1.0})
    cfg.design = DesignConfig(n_c=1, q_lqr=1.0, r_lqr=1.0, rc_alpha_grid=[1.0])
    cfg.analysis = AnalysisConfig(eval_orders=[])
    cfg.simulation = SimulationConfig(
        dt=1e-4, t_end=10.0,
        initial={"kind": "vector", "plant": [1.0], "observer": [0.0]})
    cfg.output = OutputConfig(directory="out_scalar", stride=100)
    return cfg


def _config_dict(cfg: ScenarioConfig) -> dict:
    return {
        "model": {k: getattr(cfg.model, k) for k in cfg.model.__dataclass_fields__
                  if getattr(cfg.model, k) is not None},
        "design": {k: getattr(cfg.design, k) for k in cfg.design.__dataclass_fields__},
        "analysis": {k: getattr(cfg.analysis, k)
                     for k in cfg.analysis.__dataclass_fields__},
        "simulation": {k: getattr(cfg.simulation, k)
                       for k in cfg.simulation.__dataclass_fields__
                       if getattr(cfg.simulation, k) is not None},
        "output": {k: getattr(cfg.output, k) for k in cfg.output.__dataclass_fields__},
    }


def write_fixtures(directory) -> List[Path]:
    """Write the scalar, beam and wave scenario files; returns the paths."""
    from .serialization import canonical_json_dumps

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, factory in (("scalar", scalar_scenario),
                          ("beam", beam_scenario),
                          ("wave", wave_scenario)):
        path = directory / f"{name}.json"
        path.write_text(canonical_json_dumps(_config_dict(factory())) + "\n")
        written.append(path)
    return written
