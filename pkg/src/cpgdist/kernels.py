"""Deterministic analytics on encoded chains.

Pair frequencies are written with word patterns anchored at a site ``i``:
character ``j`` of a pattern constrains site ``i + j`` and ``*`` leaves it
free, so ``"C*C"`` is a C at ``i`` and ``i + 2`` and ``"*A"`` an A at
``i + 1``. ``(W, W')(t)`` compares time 0 with time ``t`` on one lineage;
``[W, W'](t)`` compares two lineages that split ``t`` ago from a
stationary ancestor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .model import (
    EncodedChain,
    SubstitutionParams,
    build_four_state_jc,
    build_six_state_jc,
    build_windowed,
)

ANCESTOR = "ancestor"
DIVERGENCE = "divergence"
MODES = (ANCESTOR, DIVERGENCE)


def expm(chain: EncodedChain | np.ndarray, t: float) -> np.ndarray:
    """Transition matrix ``exp(t G)``, clamped and renormalised."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    gen = chain.generator if isinstance(chain, EncodedChain) else np.asarray(chain)
    if t == 0:
        return np.eye(gen.shape[0])
    p = scipy.linalg.expm(gen * t)
    if p.min() < -1e-12:
        raise ArithmeticError(f"matrix exponential lost positivity ({p.min():.3g})")
    p[p < 0] = 0.0
    return p / p.sum(axis=1, keepdims=True)


def _mass(p: np.ndarray, states: np.ndarray) -> np.ndarray:
    return p[:, states].sum(axis=1) if len(states) else np.zeros(p.shape[0])


def pair_freq_ancestor(chain: EncodedChain, w0, wt, t: float) -> float:
    """Stationary frequency of ``w0`` at time 0 together with ``wt`` at ``t``."""
    a, b = chain.indices(w0), chain.indices(wt)
    if not len(a) or not len(b):
        return 0.0
    p = expm(chain, t)
    return float(chain.stationary[a] @ _mass(p[a], b))


def pair_freq_divergence(chain: EncodedChain, w1, w2, t: float) -> float:
    """Frequency of ``w1`` on one lineage and ``w2`` on the other."""
    p = expm(chain, t)
    return float(chain.stationary @ (_mass(p, chain.indices(w1)) * _mass(p, chain.indices(w2))))


def pair_freq(chain: EncodedChain, w0, w1, t: float, mode: str = ANCESTOR) -> float:
    if mode == ANCESTOR:
        return pair_freq_ancestor(chain, w0, w1, t)
    if mode == DIVERGENCE:
        return pair_freq_divergence(chain, w0, w1, t)
    raise ValueError(f"unknown mode {mode!r}")


# -- word patterns on window chains ------------------------------------------------

_RESOLVES = {"first": set("TC"), "inner": set("ATCG"), "last": set("GA")}


def _constraints(pattern: str) -> dict:
    out = {}
    for j, ch in enumerate(pattern):
        if ch != "*":
            if ch not in "ATCG":
                raise ValueError(f"bad pattern {pattern!r}")
            out[j] = ch
    return out


def _placement(patterns):
    """Smallest window (width, shift) resolving every constrained letter."""
    needed = {}
    for pat in patterns:
        for j, ch in _constraints(pat).items():
            needed.setdefault(j, set()).add(ch)
    for width in (2, 3, 4):
        for shift in range(width):
            ok = True
            for j, letters in needed.items():
                k = j + shift
                if not 0 <= k < width:
                    ok = False
                    break
                kind = "first" if k == 0 else "last" if k == width - 1 else "inner"
                if not letters <= _RESOLVES[kind]:
                    ok = False
                    break
            if ok:
                return width, shift
    raise ValueError(f"patterns {patterns} need a window wider than 4")


def _states(chain: EncodedChain, pattern: str, shift: int) -> np.ndarray:
    return chain.select({j + shift: ch for j, ch in _constraints(pattern).items()})


def word_pair_freq(params: SubstitutionParams, w0: str, w1: str, t: float, mode: str = ANCESTOR) -> float:
    """``(w0, w1)(t)`` or ``[w0, w1](t)`` for word patterns, on the smallest window chain."""
    width, shift = _placement((w0, w1))
    chain = build_windowed(params, width)
    return pair_freq(chain, _states(chain, w0, shift), _states(chain, w1, shift), t, mode)


def word_freq(params: SubstitutionParams, word: str) -> float:
    """Stationary frequency of a word pattern."""
    width, shift = _placement((word,))
    chain = build_windowed(params, width)
    return float(chain.stationary[_states(chain, word, shift)].sum())


def letter_freq(params: SubstitutionParams, letter: str) -> float:
    """Stationary letter frequency, read off the 9-state chain."""
    if letter not in "ATCG" or len(letter) != 1:
        raise ValueError(f"not a nucleotide: {letter!r}")
    return word_freq(params, letter)


@dataclass(frozen=True)
class PairCurve:
    """``t -> (w0, w1)(t)`` or ``[w0, w1](t)`` on a fixed chain."""

    chain: EncodedChain
    w0: np.ndarray
    w1: np.ndarray
    mode: str = ANCESTOR

    @classmethod
    def for_words(cls, params, w0: str, w1: str, mode: str = ANCESTOR) -> "PairCurve":
        width, shift = _placement((w0, w1))
        chain = build_windowed(params, width)
        return cls(chain, _states(chain, w0, shift), _states(chain, w1, shift), mode)

    def __call__(self, t: float) -> float:
        return pair_freq(self.chain, self.w0, self.w1, t, self.mode)

    def derivative(self, t: float) -> float:
        """Exact time derivative via ``d/dt exp(tG) = exp(tG) G``."""
        p = expm(self.chain, t)
        dp = p @ self.chain.generator
        pi = self.chain.stationary
        if self.mode == ANCESTOR:
            return float(pi[self.w0] @ _mass(dp[self.w0], self.w1))
        return float(pi @ (_mass(dp, self.w0) * _mass(p, self.w1) + _mass(p, self.w0) * _mass(dp, self.w1)))


# -- JC+CpG closed forms ------------------------------------------------------------


@dataclass(frozen=True)
class SpectralConstants:
    r: float
    u: float
    u_plus: float
    u_minus: float
    v_plus: float
    v_minus: float
    c_0: float
    c_plus: float
    c_minus: float
    a_0: float
    a_plus: float
    a_minus: float
    C_star: float
    A_star: float
    CG_star: float


@lru_cache(maxsize=128)
def spectral_constants(r: float) -> SpectralConstants:
    if not r >= 0:
        raise ValueError(f"CpG rate must be nonnegative, got {r}")
    u = math.sqrt(4 + 2 * r + r * r)
    d = 16 + 5 * r
    c_0 = (3 + r) / (2 * d)
    c_plus = (3 + r) / (4 * u * d * d) * (u * (16 + 3 * r) - (32 + 14 * r + 3 * r * r))
    c_minus = (3 + r) / (4 * u * d * d) * (u * (16 + 3 * r) + (32 + 14 * r + 3 * r * r))
    a_0 = (80 + 31 * r) / (32 * d)
    # Residues of the 6-state resolvent at -u_+ and -u_-.
    poly = 512 + 384 * r + 106 * r**2 + 13 * r**3
    tail = u * (256 + 128 * r + 13 * r**2)
    a_plus = (tail - poly) / (64 * u * d * d)
    a_minus = (tail + poly) / (64 * u * d * d)
    return SpectralConstants(
        r=r,
        u=u,
        u_plus=6 + r + u,
        u_minus=6 + r - u,
        v_plus=10 + r + u,
        v_minus=10 + r - u,
        c_0=c_0,
        c_plus=c_plus,
        c_minus=c_minus,
        a_0=a_0,
        a_plus=a_plus,
        a_minus=a_minus,
        C_star=(4 + r) / d,
        A_star=(8 + 3 * r) / (2 * d),
        CG_star=1 / d,
    )


def cc_closed_form(r: float, t):
    """(C,C)(t) for JC+CpG at stationarity; ``t`` may be an array."""
    k = spectral_constants(r)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    out = k.c_0 * np.exp(-4 * t) + k.c_plus * np.exp(-k.u_plus * t) + k.c_minus * np.exp(-k.u_minus * t) + k.C_star**2
    return float(out) if out.ndim == 0 else out


def aa_closed_form(r: float, t):
    """(A,A)(t) for JC+CpG at stationarity; ``t`` may be an array."""
    k = spectral_constants(r)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be nonnegative")
    out = k.a_0 * np.exp(-4 * t) + k.a_plus * np.exp(-k.u_plus * t) + k.a_minus * np.exp(-k.u_minus * t) + k.A_star**2
    return float(out) if out.ndim == 0 else out


def cc_closed_form_derivative(r: float, t: float) -> float:
    k = spectral_constants(r)
    return float(
        -4 * k.c_0 * np.exp(-4 * t) - k.u_plus * k.c_plus * np.exp(-k.u_plus * t) - k.u_minus * k.c_minus * np.exp(-k.u_minus * t)
    )


def aa_closed_form_derivative(r: float, t: float) -> float:
    k = spectral_constants(r)
    return float(
        -4 * k.a_0 * np.exp(-4 * t) - k.u_plus * k.a_plus * np.exp(-k.u_plus * t) - k.u_minus * k.a_minus * np.exp(-k.u_minus * t)
    )


def jc_curve(r: float, letter: str, mode: str = ANCESTOR) -> PairCurve:
    """(x,x) / [x,x] for JC+CpG on the 4-state (C) or 6-state (A) chain."""
    if letter == "C":
        chain = build_four_state_jc(r)
        w = chain.indices(["CG", "C~G"])
    elif letter == "A":
        chain = build_six_state_jc(r)
        w = chain.indices(["CA", "~CA"])
    else:
        raise ValueError(f"letter must be C or A, got {letter!r}")
    return PairCurve(chain, w, w, mode)


def context_curve(r: float, letter: str, mode: str = ANCESTOR) -> PairCurve:
    """(C*, CG) for letter C and (*A, CG) for letter A."""
    if letter == "C":
        chain = build_four_state_jc(r)
        return PairCurve(chain, chain.indices(["CG", "C~G"]), chain.indices(["CG"]), mode)
    chain = build_six_state_jc(r)
    return PairCurve(chain, chain.indices(["CA", "~CA"]), chain.indices(["CG"]), mode)


def star_a_cg_by_u_route(r: float, t: float) -> float:
    """(*A, CG)(t) from ``U' = Q^T U`` on the 4-state chain.

    ``U`` stacks (*A, s)(t) over the four {C,~C} x {G,~G} states ``s``;
    at ``t = 0`` only the ~G states carry an A in second position.
    """
    six = build_six_state_jc(r)
    pi = dict(zip(six.labels, six.stationary))
    u0 = np.array([0.0, 0.0, pi["~CA"], pi["CA"]])
    q = build_four_state_jc(r).generator
    return float((scipy.linalg.expm(q.T * t) @ u0)[0])


def curve_derivative_identities(params: SubstitutionParams, t: float, h: float = 1e-5) -> dict:
    """Residuals of the four rate identities for (C,C), (A,A), [C,C], [A,A].

    Each residual is ``|central difference - right-hand side|``.
    """
    r = params.jc_cpg_r
    if r is None:
        raise ValueError("derivative identities are stated for JC+CpG parameters")
    if t < h:
        raise ValueError("central differences need t >= h")
    k = spectral_constants(r)
    out = {}
    for letter, star, sign in (("C", k.C_star, -1.0), ("A", k.A_star, 1.0)):
        for mode, factor in ((ANCESTOR, 1.0), (DIVERGENCE, 2.0)):
            curve = jc_curve(r, letter, mode)
            ctx = context_curve(r, letter, mode)
            fd = (curve(t + h) - curve(t - h)) / (2 * h)
            rhs = factor * (-4 * curve(t) + sign * r * ctx(t) + star)
            name = f"({letter},{letter})" if mode == ANCESTOR else f"[{letter},{letter}]"
            out[name] = abs(fd - rhs)
    return out


# -- variances ---------------------------------------------------------------------


def _variance_terms(params, x: str, t: float, mode: str):
    if x not in ("A", "C"):
        raise ValueError(f"letter must be A or C, got {x!r}")
    p1 = word_pair_freq(params, x, x, t, mode)
    p2 = word_pair_freq(params, x + x, x + x, t, mode)
    p3 = word_pair_freq(params, x + "*" + x, x + "*" + x, t, mode)
    return p1, p2, p3


def sigma2_asymptotic(params: SubstitutionParams, x: str, t: float, mode: str = ANCESTOR) -> float:
    """Asymptotic variance of ``sqrt(N)`` times the observed (x,x) or [x,x]."""
    p1, p2, p3 = _variance_terms(params, x, t, mode)
    return p1 + 2 * p2 + 2 * p3 - 5 * p1 * p1


def sigma2_finite(params: SubstitutionParams, x: str, t: float, n: int, mode: str = ANCESTOR) -> float:
    """Variance of the observed (x,x) or [x,x] over ``n`` consecutive sites."""
    if n < 2:
        raise ValueError(f"need at least 2 sites, got {n}")
    p1, p2, p3 = _variance_terms(params, x, t, mode)
    q = p1 * p1
    total = p1 - q + 2 * (1 - 1 / n) * (p2 - q) + 2 * (1 - 2 / n) * (p3 - q)
    return total / n


# -- spectral structure of [A,A] ------------------------------------------------------


def aa_divergence_spectrum(r: float, tol: float = 1e-9) -> dict:
    """Exponential expansion of [A,A](t) on the 6-state chain.

    Returns ``{rate: coefficient}`` with rates merged within ``tol``; the
    rate-0 term is (A)_*^2.
    """
    chain = build_six_state_jc(r)
    vals, vecs = np.linalg.eig(chain.generator)
    inv = np.linalg.inv(vecs)
    target = np.zeros(chain.n)
    target[chain.indices(["CA", "~CA"])] = 1.0
    # P_t 1_A = sum_k e^{lambda_k t} vecs[:, k] (inv[k] . 1_A)
    comps = vecs * (inv @ target)[None, :]
    pi = chain.stationary
    terms = {}
    for j in range(chain.n):
        for k in range(chain.n):
            rate = -(vals[j] + vals[k])
            coef = np.sum(pi * comps[:, j] * comps[:, k])
            key = next((x for x in terms if abs(x - rate) < tol), None)
            if key is None:
                terms[rate] = coef
            else:
                terms[key] += coef
    return {float(np.real(k)): float(np.real(v)) for k, v in terms.items()}
