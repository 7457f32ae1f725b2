"""Scalar boundary laws: the dissipative feedback g and the forcing F.

Feedback laws are continuous, nondecreasing and vanish at zero; forcing
laws are globally Lipschitz and vanish at zero.  Built-in families carry
analytic sector and Lipschitz metadata; tabulated laws fall back to dense
sampling with an estimate flag.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NoValidSectorError

FEEDBACK_KINDS = ("linear_gain", "deadzone", "saturation", "power_sector", "tabulated")
FORCING_KINDS = ("zero", "linear", "tanh_antidamping", "monotone_damping",
                 "piecewise_linear")


@dataclass(frozen=True)
class SectorData:
    """Two-sided linear envelope alpha1|s| <= |g(s)| <= alpha2|s| for |s| >= S."""

    alpha1: float
    alpha2: float
    s_threshold: float
    sup_g_sq_on_ball: float
    estimated: bool = False

    def __post_init__(self):
        if not (0 < self.alpha1 <= self.alpha2):
            raise ContractError("sector needs 0 < alpha1 <= alpha2")
        if self.s_threshold < 0 or self.sup_g_sq_on_ball < 0:
            raise ContractError("sector threshold and sup must be nonnegative")


@dataclass(frozen=True)
class LipschitzData:
    q_global: float | None
    q_local: float
    neighborhood_radius: float


@dataclass(frozen=True)
class FeedbackLaw:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FEEDBACK_KINDS:
            raise ContractError(f"unknown feedback kind '{self.kind}'")
        p = self.params
        if self.kind == "linear_gain":
            if p["k"] < 0:
                raise ContractError("linear gain must be nonnegative")
        elif self.kind == "deadzone":
            if p["d"] < 0:
                raise ContractError("deadzone half-width must be nonnegative")
        elif self.kind == "saturation":
            if p["k"] <= 0 or p["cap"] <= 0:
                raise ContractError("saturation needs positive slope and cap")
        elif self.kind == "power_sector":
            if p["a"] < 0 or p["b"] < 0:
                raise ContractError("cubic-plus-linear law needs a, b >= 0")
        elif self.kind == "tabulated":
            self._validate_table(p)

    @staticmethod
    def _validate_table(p):
        s = np.asarray(p["s"], dtype=float)
        g = np.asarray(p["g"], dtype=float)
        if s.ndim != 1 or s.shape != g.shape or s.size < 2:
            raise ContractError("table needs matching 1-D s and g arrays")
        if np.any(np.diff(s) <= 0):
            raise ContractError("table abscissae must be strictly increasing")
        # user-supplied law: verify the standing assumptions by sampling
        lo, hi = min(s[0], -100.0), max(s[-1], 100.0)
        samples = np.linspace(lo, hi, 10_000)
        vals = _table_eval(samples, s, g)
        if np.any(np.diff(vals) < -1e-12):
            raise ContractError("tabulated feedback must be nondecreasing")
        if abs(_table_eval(np.array([0.0]), s, g)[0]) > 1e-12:
            raise ContractError("tabulated feedback must vanish at zero")

    # constructors -------------------------------------------------------
    @classmethod
    def linear_gain(cls, k):
        return cls("linear_gain", {"k": float(k)})

    @classmethod
    def deadzone(cls, d):
        return cls("deadzone", {"d": float(d)})

    @classmethod
    def saturation(cls, k, cap):
        return cls("saturation", {"k": float(k), "cap": float(cap)})

    @classmethod
    def power_sector(cls, a, b):
        return cls("power_sector", {"a": float(a), "b": float(b)})

    @classmethod
    def tabulated(cls, s, g):
        return cls("tabulated", {"s": tuple(map(float, s)),
                                 "g": tuple(map(float, g))})

    # evaluation ---------------------------------------------------------
    def __call__(self, s):
        p = self.params
        if self.kind == "linear_gain":
            return p["k"] * s
        if self.kind == "deadzone":
            mag = abs(s) - p["d"]
            return math.copysign(max(mag, 0.0), s)
        if self.kind == "saturation":
            return min(max(p["k"] * s, -p["cap"]), p["cap"])
        if self.kind == "power_sector":
            return p["a"] * s + p["b"] * s ** 3
        s_tab = np.asarray(p["s"])
        g_tab = np.asarray(p["g"])
        return float(_table_eval(np.array([float(s)]), s_tab, g_tab)[0])

    def derivative(self, s):
        """Slope for Newton steps; any subgradient is fine at kinks."""
        p = self.params
        if self.kind == "linear_gain":
            return p["k"]
        if self.kind == "deadzone":
            return 1.0 if abs(s) >= p["d"] else 0.0
        if self.kind == "saturation":
            return p["k"] if abs(p["k"] * s) <= p["cap"] else 0.0
        if self.kind == "power_sector":
            return p["a"] + 3.0 * p["b"] * s ** 2
        s_tab = np.asarray(p["s"])
        idx = np.clip(np.searchsorted(s_tab, s) - 1, 0, s_tab.size - 2)
        g_tab = np.asarray(p["g"])
        return float((g_tab[idx + 1] - g_tab[idx]) / (s_tab[idx + 1] - s_tab[idx]))


def _table_eval(samples, s_tab, g_tab):
    # piecewise linear through the knots, end slopes continued outside
    out = np.interp(samples, s_tab, g_tab)
    slope_lo = (g_tab[1] - g_tab[0]) / (s_tab[1] - s_tab[0])
    slope_hi = (g_tab[-1] - g_tab[-2]) / (s_tab[-1] - s_tab[-2])
    below = samples < s_tab[0]
    above = samples > s_tab[-1]
    out[below] = g_tab[0] + slope_lo * (samples[below] - s_tab[0])
    out[above] = g_tab[-1] + slope_hi * (samples[above] - s_tab[-1])
    return out


def eval_g(law, s):
    return law(s)


def _sup_g_sq(law, s_threshold):
    # g nondecreasing, so the sup over [-S, S] sits at an endpoint
    if s_threshold == 0.0:
        return 0.0
    return max(law(s_threshold), -law(-s_threshold)) ** 2


def sector_params(law):
    """Tightest analytic sector for built-ins; sampled estimate for tables.

    Saturating and cubic-growth laws admit no valid sector: the former
    loses the linear lower bound for large |s|, the latter the upper bound.
    """
    p = law.params
    if law.kind == "linear_gain":
        if p["k"] <= 0:
            raise NoValidSectorError("zero gain has no positive lower bound")
        return SectorData(p["k"], p["k"], 0.0, 0.0)
    if law.kind == "deadzone":
        d = p["d"]
        if d == 0.0:
            return SectorData(1.0, 1.0, 0.0, 0.0)
        # for |s| >= 2d we have |s| - d >= |s|/2
        return SectorData(0.5, 1.0, 2.0 * d, _sup_g_sq(law, 2.0 * d))
    if law.kind == "saturation":
        raise NoValidSectorError(
            "saturation caps |g| while any lower bound alpha1|s| grows")
    if law.kind == "power_sector":
        if p["b"] > 0:
            raise NoValidSectorError(
                "cubic growth exceeds any linear upper bound alpha2|s|")
        if p["a"] <= 0:
            raise NoValidSectorError("degenerate law g = 0")
        return SectorData(p["a"], p["a"], 0.0, 0.0)

    # tabulated: estimate on a dense grid, flag as sampled
    s_tab = np.asarray(p["s"])
    radius = max(abs(s_tab[0]), abs(s_tab[-1]), 1.0)
    for s_threshold in [0.0] + sorted(set(np.abs(s_tab).tolist())):
        samples = np.linspace(max(s_threshold, 1e-9), 100.0 * radius, 10_000)
        ratios_pos = np.array([law(s) / s for s in samples])
        ratios_neg = np.array([law(-s) / -s for s in samples])
        ratios = np.concatenate([ratios_pos, ratios_neg])
        a1 = float(ratios.min())
        a2 = float(ratios.max())
        if a1 > 0:
            return SectorData(a1, a2, float(s_threshold),
                              _sup_g_sq(law, float(s_threshold)), estimated=True)
    raise NoValidSectorError("no sampled sector with a positive lower bound")


@dataclass(frozen=True)
class ForcingLaw:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FORCING_KINDS:
            raise ContractError(f"unknown forcing kind '{self.kind}'")
        p = self.params
        if self.kind == "tanh_antidamping" and p["q"] < 0:
            raise ContractError("anti-damping strength must be nonnegative")
        if self.kind == "monotone_damping" and p["k"] < 0:
            raise ContractError("damping strength must be nonnegative")
        if self.kind == "piecewise_linear" and p["knee"] <= 0:
            raise ContractError("knee must be positive")

    @classmethod
    def zero(cls):
        return cls("zero", {})

    @classmethod
    def linear(cls, c):
        return cls("linear", {"c": float(c)})

    @classmethod
    def tanh_antidamping(cls, q):
        return cls("tanh_antidamping", {"q": float(q)})

    @classmethod
    def monotone_damping(cls, k):
        return cls("monotone_damping", {"k": float(k)})

    @classmethod
    def piecewise_linear(cls, slope_inner, slope_outer, knee):
        return cls("piecewise_linear", {"slope_inner": float(slope_inner),
                                        "slope_outer": float(slope_outer),
                                        "knee": float(knee)})

    def __call__(self, s):
        p = self.params
        if self.kind == "zero":
            return 0.0
        if self.kind == "linear":
            return p["c"] * s
        if self.kind == "tanh_antidamping":
            return p["q"] * math.tanh(s)
        if self.kind == "monotone_damping":
            return -p["k"] * math.tanh(s)
        inner, outer, knee = p["slope_inner"], p["slope_outer"], p["knee"]
        if abs(s) <= knee:
            return inner * s
        return math.copysign(inner * knee + outer * (abs(s) - knee), s)

    @property
    def nonincreasing(self):
        """Whether F dissipates (monotone case of the decay analysis)."""
        p = self.params
        if self.kind == "zero":
            return True
        if self.kind == "linear":
            return p["c"] <= 0
        if self.kind == "tanh_antidamping":
            return p["q"] == 0
        if self.kind == "monotone_damping":
            return True
        return p["slope_inner"] <= 0 and p["slope_outer"] <= 0


def eval_F(law, s):
    return law(s)


def lipschitz_constant(law):
    """Analytic global/local Lipschitz data for the built-in forcing laws."""
    p = law.params
    if law.kind == "zero":
        return LipschitzData(0.0, 0.0, math.inf)
    if law.kind == "linear":
        c = abs(p["c"])
        return LipschitzData(c, c, math.inf)
    if law.kind == "tanh_antidamping":
        # |d/ds q tanh(s)| = q sech^2(s) <= q
        return LipschitzData(p["q"], p["q"], math.inf)
    if law.kind == "monotone_damping":
        return LipschitzData(p["k"], p["k"], math.inf)
    inner = abs(p["slope_inner"])
    outer = abs(p["slope_outer"])
    return LipschitzData(max(inner, outer), inner, p["knee"])
