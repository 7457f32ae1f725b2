"""Scenario configuration: JSON schema, validation and object builders."""

import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError, ContractError
from .nonlinearities import FeedbackLaw, ForcingLaw
from .solver import SolverConfig, make_initial
from .state_space import Grid

_FEEDBACK_PARAMS = {
    "identity": (),
    "linear_gain": ("k",),
    "deadzone": ("d",),
    "saturation": ("k", "cap"),
    "power_sector": ("a", "b"),
    "tabulated": ("s", "g"),
}
_FORCING_PARAMS = {
    "zero": (),
    "linear": ("c",),
    "tanh_antidamping": ("q",),
    "monotone_damping": ("k",),
    "piecewise_linear": ("slope_inner", "slope_outer", "knee"),
}
_INIT_PARAMS = {
    "gaussian_bump": ("amplitude", "x0", "width"),
    "right_moving_pulse": ("amplitude", "x0", "width"),
    "sine_mode": ("amplitude", "mode"),
    "constant_offset": ("offset",),
}
_INIT_OPTIONAL = {"amplitude", "mode", "offset"}
_CERT_MODES = ("none", "monotone", "antidamping")


@dataclass(frozen=True)
class DomainSection:
    length_l: float
    n_cells: int
    cfl_lambda: float = 0.9
    t_final: float = 1.0
    sample_stride: int = 1
    boundary_tol: float = 1e-12
    boundary_max_iter: int = 100


@dataclass(frozen=True)
class LawSection:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class InitSection:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CertificateSection:
    mode: str = "none"
    rho0: float = 1.0
    rho_l: float = 2.0
    grid_search: bool = False


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    emit_snapshots: bool = False
    snapshot_stride: int = 50
    figures: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    domain: DomainSection
    g: LawSection
    forcing: LawSection
    init: InitSection
    certificate: CertificateSection = CertificateSection()
    output: OutputSection = OutputSection()

    def to_dict(self):
        return {
            "domain": {"L": self.domain.length_l, "N": self.domain.n_cells,
                       "cfl_lambda": self.domain.cfl_lambda,
                       "t_final": self.domain.t_final,
                       "sample_stride": self.domain.sample_stride,
                       "boundary_tol": self.domain.boundary_tol,
                       "boundary_max_iter": self.domain.boundary_max_iter},
            "g": {"kind": self.g.kind, "params": dict(self.g.params)},
            "F": {"kind": self.forcing.kind, "params": dict(self.forcing.params)},
            "init": {"kind": self.init.kind, "params": dict(self.init.params)},
            "certificate": {"mode": self.certificate.mode,
                            "rho0": self.certificate.rho0,
                            "rhoL": self.certificate.rho_l,
                            "grid_search": self.certificate.grid_search},
            "output": {"directory": self.output.directory,
                       "emit_snapshots": self.output.emit_snapshots,
                       "snapshot_stride": self.output.snapshot_stride,
                       "figures": self.output.figures},
        }

    def scenario_hash(self):
        canonical = json.dumps(self.to_dict(), sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _require(source, key, kinds, context):
    if key not in source:
        raise ConfigError(f"{context}.{key}", "missing required key")
    value = source[key]
    if kinds is not None and not isinstance(value, kinds):
        raise ConfigError(f"{context}.{key}",
                          f"expected {kinds}, got {type(value).__name__}")
    return value


def _reject_unknown(source, allowed, context):
    for key in source:
        if key not in allowed:
            raise ConfigError(f"{context}.{key}" if context else key,
                              "unknown key")


def _positive(value, key, context):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
        raise ConfigError(f"{context}.{key}", "expected a positive number")
    return float(value)


def _positive_int(value, key, context, minimum=1):
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ConfigError(f"{context}.{key}", f"expected an integer >= {minimum}")
    return value


def _parse_domain(raw):
    _reject_unknown(raw, {"L", "N", "cfl_lambda", "t_final", "sample_stride",
                          "boundary_tol", "boundary_max_iter"}, "domain")
    length_l = _positive(_require(raw, "L", (int, float), "domain"), "L", "domain")
    n_cells = _positive_int(_require(raw, "N", int, "domain"), "N", "domain",
                            minimum=4)
    cfl = raw.get("cfl_lambda", 0.9)
    if not isinstance(cfl, (int, float)) or not 0 < cfl <= 1:
        raise ConfigError("domain.cfl_lambda", "expected a number in (0, 1]")
    t_final = _positive(_require(raw, "t_final", (int, float), "domain"),
                        "t_final", "domain")
    stride = _positive_int(raw.get("sample_stride", 1), "sample_stride", "domain")
    tol = _positive(raw.get("boundary_tol", 1e-12), "boundary_tol", "domain")
    max_iter = _positive_int(raw.get("boundary_max_iter", 100),
                             "boundary_max_iter", "domain")
    return DomainSection(length_l, n_cells, float(cfl), t_final, stride, tol,
                         max_iter)


def _parse_law(raw, registry, context):
    _reject_unknown(raw, {"kind", "params"}, context)
    kind = _require(raw, "kind", str, context)
    if kind not in registry:
        raise ConfigError(f"{context}.kind", f"unknown kind '{kind}'; "
                          f"expected one of {sorted(registry)}")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{context}.params", "expected an object")
    allowed = registry[kind]
    _reject_unknown(params, set(allowed), f"{context}.params")
    if context in ("g", "F"):
        missing = [k for k in allowed if k not in params]
    else:
        missing = [k for k in allowed
                   if k not in params and k not in _INIT_OPTIONAL]
    if missing:
        raise ConfigError(f"{context}.params.{missing[0]}", "missing required key")
    return kind, dict(params)


def _parse_certificate(raw):
    _reject_unknown(raw, {"mode", "rho0", "rhoL", "grid_search"}, "certificate")
    mode = raw.get("mode", "none")
    if mode not in _CERT_MODES:
        raise ConfigError("certificate.mode",
                          f"expected one of {_CERT_MODES}, got '{mode}'")
    rho0 = _positive(raw.get("rho0", 1.0), "rho0", "certificate")
    rho_l = _positive(raw.get("rhoL", 2.0), "rhoL", "certificate")
    if rho_l <= rho0:
        raise ConfigError("certificate.rhoL", "weight must satisfy rhoL > rho0")
    grid_search = raw.get("grid_search", False)
    if not isinstance(grid_search, bool):
        raise ConfigError("certificate.grid_search", "expected a boolean")
    return CertificateSection(mode, rho0, rho_l, grid_search)


def _parse_output(raw):
    _reject_unknown(raw, {"directory", "emit_snapshots", "snapshot_stride",
                          "figures"}, "output")
    directory = raw.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("output.directory", "expected a nonempty string")
    emit = raw.get("emit_snapshots", False)
    figures = raw.get("figures", True)
    if not isinstance(emit, bool) or not isinstance(figures, bool):
        raise ConfigError("output.emit_snapshots", "expected a boolean")
    stride = _positive_int(raw.get("snapshot_stride", 50), "snapshot_stride",
                           "output")
    return OutputSection(directory, emit, stride, figures)


def parse_config(text):
    """Parse and validate a scenario document; unknown keys are rejected."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<document>", "top level must be an object")
    _reject_unknown(raw, {"domain", "g", "F", "init", "certificate", "output"},
                    "")
    domain = _parse_domain(_require(raw, "domain", dict, "<document>"))
    g_kind, g_params = _parse_law(_require(raw, "g", dict, "<document>"),
                                  _FEEDBACK_PARAMS, "g")
    f_kind, f_params = _parse_law(_require(raw, "F", dict, "<document>"),
                                  _FORCING_PARAMS, "F")
    init_kind, init_params = _parse_law(_require(raw, "init", dict, "<document>"),
                                        _INIT_PARAMS, "init")
    cert = _parse_certificate(raw.get("certificate", {}))
    output = _parse_output(raw.get("output", {}))
    config = ScenarioConfig(domain=domain, g=LawSection(g_kind, g_params),
                            forcing=LawSection(f_kind, f_params),
                            init=InitSection(init_kind, init_params),
                            certificate=cert, output=output)
    # surface law parameter violations as config errors with the law key
    try:
        build_feedback(config)
        build_forcing(config)
    except ContractError as exc:
        raise ConfigError("g/F params", str(exc)) from exc
    return config


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_grid(config):
    return Grid(config.domain.length_l, config.domain.n_cells)


def build_feedback(config):
    kind, params = config.g.kind, config.g.params
    if kind == "identity":
        return FeedbackLaw.linear_gain(1.0)
    if kind == "tabulated":
        return FeedbackLaw.tabulated(params["s"], params["g"])
    return FeedbackLaw(kind, dict(params))


def build_forcing(config):
    return ForcingLaw(config.forcing.kind, dict(config.forcing.params))


def build_initial(config, grid):
    return make_initial(config.init.kind, config.init.params, grid)


def build_solver_config(config, left_boundary="dynamic"):
    return SolverConfig(cfl_lambda=config.domain.cfl_lambda,
                        t_final=config.domain.t_final,
                        boundary_tol=config.domain.boundary_tol,
                        boundary_max_iter=config.domain.boundary_max_iter,
                        sample_stride=config.domain.sample_stride,
                        left_boundary=left_boundary)
