"""Observed statistics, time estimates and their confidence intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.stats

from .kernels import (
    ANCESTOR,
    DIVERGENCE,
    MODES,
    PairCurve,
    aa_closed_form,
    cc_closed_form,
    jc_curve,
    letter_freq,
    spectral_constants,
)
from .model import CODE, SubstitutionParams

T_START = 1.0
T_CAP = 2.0**10
T_TOL = 1e-12


class ObsOutOfRange(ValueError):
    """Observed frequency outside ((x)_*^2, (x)_*]."""


class InvalidLetter(ValueError):
    pass


# Pattern pairs read from every alignment; see kernels for the notation.
OBSERVED_PAIRS = (
    ("C", "C"),
    ("A", "A"),
    ("CC", "CC"),
    ("AA", "AA"),
    ("C*C", "C*C"),
    ("A*A", "A*A"),
    ("C", "CG"),
    ("*A", "CG"),
    ("C", "A"),
    ("C", "T"),
    ("C", "G"),
    ("C", "TA"),
    ("C", "TG"),
    ("C", "CA"),
)


def pattern_indicator(seq: np.ndarray, pattern: str) -> np.ndarray:
    """Boolean array: site ``i`` carries ``pattern`` (circular indexing)."""
    hit = np.ones(seq.shape[0], dtype=bool)
    for j, ch in enumerate(pattern):
        if ch != "*":
            hit &= np.roll(seq, -j) == CODE[ch]
    return hit


def pair_indicator(pair, w0: str, w1: str) -> np.ndarray:
    return pattern_indicator(pair.left, w0) & pattern_indicator(pair.right, w1)


@dataclass(frozen=True)
class ObservedStats:
    """Empirical frequencies of an alignment.

    ``pairs`` maps ``(w0, w1)`` patterns to ``(w0, w1)_obs`` in ancestor
    mode and ``[w0, w1]_obs`` in divergence mode; ``letters`` holds the
    letter frequencies of the left sequence.
    """

    n: int
    mode: str
    pairs: dict = field(repr=False)
    letters: dict

    def pair(self, w0: str, w1: str) -> float:
        return self.pairs[w0, w1]

    def xx(self, x: str) -> float:
        return self.pairs[x, x]

    def letter(self, x: str) -> float:
        return self.letters[x]


def observe(pair) -> ObservedStats:
    if pair.n < 3:
        raise ValueError("alignments need at least 3 sites")
    pairs = {(a, b): float(pair_indicator(pair, a, b).mean()) for a, b in OBSERVED_PAIRS}
    letters = {x: float(np.mean(pair.left == CODE[x])) for x in "ATCG"}
    return ObservedStats(pair.n, pair.mode, pairs, letters)


def _require_jc(params: SubstitutionParams) -> float:
    r = params.jc_cpg_r
    if r is None:
        raise ValueError("this estimator needs JC+CpG parameters")
    return r


def nu_obs(stats: ObservedStats, x: str) -> float:
    p = stats.xx(x)
    return p - 5 * p * p + 2 * stats.pair(x + x, x + x) + 2 * stats.pair(x + "*" + x, x + "*" + x)


def kappa_nu(stats: ObservedStats, params: SubstitutionParams, x: str, mode: Optional[str] = None) -> tuple[float, float]:
    """Plug-in slope magnitude and variance for (x,x) or [x,x], JC+CpG."""
    r = _require_jc(params)
    mode = mode or stats.mode
    if x == "C":
        kappa = 4 * stats.xx("C") + r * stats.pair("C", "CG") - stats.letter("C")
    elif x == "A":
        kappa = 4 * stats.xx("A") - r * stats.pair("*A", "CG") - stats.letter("A")
    else:
        raise InvalidLetter(f"letter must be A or C, got {x!r}")
    if mode == DIVERGENCE:
        kappa *= 2
    return kappa, nu_obs(stats, x)


def kappa_rn(stats: ObservedStats, params: SubstitutionParams) -> float:
    """Plug-in for ``-(C,C)'(t)`` under a general RN+YpR model."""
    p = params
    return (
        -p.v_C * stats.pair("C", "A")
        - p.w_C * stats.pair("C", "T")
        + (p.v_A + p.w_T + p.v_G) * stats.xx("C")
        - p.v_C * stats.pair("C", "G")
        - p.r("A", "C") * stats.pair("C", "TA")
        - p.r("G", "C") * stats.pair("C", "TG")
        + p.r("A", "T") * stats.pair("C", "CA")
        + p.r("G", "T") * stats.pair("C", "CG")
    )


def invert_curve(curve: Callable[[float], float], obs: float, x_star: float) -> float:
    """Solve ``curve(t) = obs`` for a curve decreasing from ``x_star`` to ``x_star**2``."""
    if not x_star**2 < obs <= x_star:
        raise ObsOutOfRange(f"observed {obs:.6g} outside ({x_star**2:.6g}, {x_star:.6g}]")
    if obs == x_star:
        return 0.0
    lo, hi = 0.0, T_START
    while curve(hi) >= obs:
        lo, hi = hi, 2 * hi
        if hi > T_CAP:
            raise ObsOutOfRange(f"observed {obs:.6g} is saturated (t > {T_CAP:g})")
    while hi - lo > T_TOL:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if curve(mid) >= obs:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def normal_quantile(epsilon: float) -> float:
    """``z`` with ``P(|Z| >= z) = epsilon`` for standard normal ``Z``."""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    return float(scipy.stats.norm.isf(epsilon / 2))


def time_curve(params: SubstitutionParams, x: str, mode: str) -> tuple[Callable[[float], float], float]:
    """The curve to invert and its value at ``t = 0``."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    r = params.jc_cpg_r
    if r is not None:
        k = spectral_constants(r)
        if x == "C":
            if mode == ANCESTOR:
                return (lambda t: cc_closed_form(r, t)), k.C_star
            return (lambda t: cc_closed_form(r, 2 * t)), k.C_star
        if x == "A":
            if mode == ANCESTOR:
                return (lambda t: aa_closed_form(r, t)), k.A_star
            return jc_curve(r, "A", DIVERGENCE), k.A_star
        raise InvalidLetter(f"letter must be A or C, got {x!r}")
    if x != "C":
        raise InvalidLetter("only the C-based estimator is available for general RN+YpR parameters")
    return PairCurve.for_words(params, "C", "C", mode), letter_freq(params, "C")


def time_from_frequency(params: SubstitutionParams, x: str, mode: str, obs: float) -> float:
    curve, x_star = time_curve(params, x, mode)
    return invert_curve(curve, obs, x_star)


@dataclass(frozen=True)
class TimeEstimate:
    letter: str
    mode: str
    n: int
    T: float
    kappa_obs: float
    nu_obs: float
    epsilon: float
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None

    @property
    def ci_available(self) -> bool:
        return self.ci_low is not None

    @property
    def half_width(self) -> Optional[float]:
        return None if self.ci_low is None else 0.5 * (self.ci_high - self.ci_low)

    def covers(self, t: float) -> bool:
        return self.ci_available and self.ci_low <= t <= self.ci_high

    def studentized(self, t: float) -> float:
        """``kappa * sqrt(N / nu) * (T - t)``."""
        return self.kappa_obs * math.sqrt(self.n / self.nu_obs) * (self.T - t)

    def csv(self) -> str:
        def fmt(v):
            return "nan" if v is None else f"{v:.12g}"

        fields = (self.letter, self.mode, str(self.n), fmt(self.T), fmt(self.ci_low), fmt(self.ci_high),
                  fmt(self.kappa_obs), fmt(self.nu_obs), f"{self.epsilon:g}")
        return ",".join(fields)


CSV_HEADER = "letter,mode,N,T,ci_low,ci_high,kappa,nu,epsilon"


def estimate_from_stats(stats: ObservedStats, params: SubstitutionParams, x: str, epsilon: float = 0.05) -> TimeEstimate:
    mode = stats.mode
    z = normal_quantile(epsilon)
    if params.jc_cpg_r is not None:
        kappa, nu = kappa_nu(stats, params, x, mode)
    else:
        if x != "C":
            raise InvalidLetter("only the C-based estimator is available for general RN+YpR parameters")
        kappa = kappa_rn(stats, params) * (2 if mode == DIVERGENCE else 1)
        nu = nu_obs(stats, "C")
    t_hat = time_from_frequency(params, x, mode, stats.xx(x))
    if kappa <= 0 or nu <= 0:
        return TimeEstimate(x, mode, stats.n, t_hat, kappa, nu, epsilon)
    half = z * math.sqrt(nu / stats.n) / kappa
    return TimeEstimate(x, mode, stats.n, t_hat, kappa, nu, epsilon, t_hat - half, t_hat + half)


def estimate_time(pair, params: SubstitutionParams, x: str, mode: Optional[str] = None, epsilon: float = 0.05) -> TimeEstimate:
    """Elapsed (ancestor mode) or divergence time from an alignment."""
    if mode is not None and mode != pair.mode:
        raise ValueError(f"alignment is tagged {pair.mode!r}, not {mode!r}")
    return estimate_from_stats(observe(pair), params, x, epsilon)
