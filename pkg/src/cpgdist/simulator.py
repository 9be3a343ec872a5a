"""Exact simulation of neighbour-dependent substitutions on circular sequences.

Sequences are ``uint8`` arrays over the codes of :data:`~cpgdist.model.LETTERS`
with circular topology. Evolution uses uniformization: proposals arrive at
total rate ``N * L`` where ``L`` bounds every site's total rate, each at a
uniform site, and a proposal is accepted with the context's exact rates.
This is exact in law; only the proposal order matters, so event times are
never drawn.

Random numbers come from numpy's PCG64 (``numpy.random.default_rng``);
replicates get independent streams from ``SeedSequence.spawn``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _pycore
from .kernels import ANCESTOR, DIVERGENCE, MODES
from .model import CODE, LETTERS, SubstitutionParams, build_nine_state, rate_table

try:
    from . import _core
except ImportError:  # pragma: no cover - exercised only without a build
    _core = None

_FORCE_PYTHON = os.environ.get("CPGDIST_BACKEND", "").lower() == "python"
BACKEND = "cython" if _core is not None and not _FORCE_PYTHON else "python"
BACKENDS = ("cython", "python") if _core is not None else ("python",)

CHUNK = 1 << 18


def get_sweep(backend: Optional[str] = None):
    backend = backend or BACKEND
    if backend == "cython":
        if _core is None:
            raise RuntimeError("compiled core is not built")
        return _core.sweep
    if backend == "python":
        return _pycore.sweep
    raise ValueError(f"unknown backend {backend!r}")


def encode(text: str) -> np.ndarray:
    try:
        return np.fromiter((CODE[c] for c in text.upper()), dtype=np.uint8, count=len(text))
    except KeyError as err:
        raise ValueError(f"non-ACGT character {err.args[0]!r}") from None


def decode(seq: np.ndarray) -> str:
    return np.frombuffer(LETTERS.encode(), dtype=np.uint8)[np.asarray(seq)].tobytes().decode()


def cumulative_rates(params: SubstitutionParams) -> tuple[np.ndarray, float]:
    """``(cum, bound)``: cumulative target rates per context and the max total rate."""
    table = rate_table(params)
    cum = np.ascontiguousarray(np.cumsum(table, axis=3).reshape(64, 4))
    return cum, float(cum[:, 3].max())


def evolve(seq: np.ndarray, params: SubstitutionParams, t: float, rng: np.random.Generator, backend: Optional[str] = None) -> np.ndarray:
    """A realization at time ``t`` of the process started from ``seq``."""
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    out = np.array(seq, dtype=np.uint8, copy=True)
    n = out.shape[0]
    if n < 3:
        raise ValueError("sequences need at least 3 sites")
    if t == 0:
        return out
    sweep = get_sweep(backend)
    cum, bound = cumulative_rates(params)
    remaining = int(rng.poisson(bound * n * t))
    while remaining > 0:
        m = min(remaining, CHUNK)
        sites = rng.integers(0, n, size=m, dtype=np.int64)
        levels = rng.random(m) * bound
        sweep(out, cum, sites, levels)
        remaining -= m
    return out


def default_burn_in(params: SubstitutionParams) -> float:
    """5 time units for JC+CpG, otherwise 10 over the 9-state spectral gap."""
    if params.jc_cpg_r is not None:
        return 5.0
    vals = np.linalg.eigvals(build_nine_state(params).generator)
    gap = min(-v.real for v in vals if -v.real > 1e-9)
    return 10.0 / gap


def sample_stationary(params, n: int, burn_in: Optional[float], rng, backend=None) -> np.ndarray:
    """Uniform i.i.d. letters run for ``burn_in`` time units."""
    if burn_in is None:
        burn_in = default_burn_in(params)
    if burn_in <= 0:
        raise ValueError("burn-in must be positive")
    start = rng.integers(0, 4, size=n, dtype=np.uint8)
    return evolve(start, params, burn_in, rng, backend)


@dataclass(frozen=True)
class ExperimentSpec:
    params: SubstitutionParams
    n: int
    t: float
    mode: str = ANCESTOR
    burn_in: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("N must be at least 3")
        if self.t < 0:
            raise ValueError("t must be nonnegative")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn-in must be nonnegative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(frozen=True, eq=False)
class AlignedPair:
    """Two aligned circular sequences.

    In ancestor mode ``left`` is the ancestor and ``right`` its descendant;
    in divergence mode both are descendants of a common ancestor.
    """

    left: np.ndarray
    right: np.ndarray
    mode: str = ANCESTOR

    def __post_init__(self):
        left = np.array(self.left, dtype=np.uint8)
        right = np.array(self.right, dtype=np.uint8)
        if left.ndim != 1 or left.shape != right.shape:
            raise ValueError("aligned sequences must have equal lengths")
        if left.size and max(left.max(), right.max()) > 3:
            raise ValueError("sequence codes must lie in 0..3")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        left.setflags(write=False)
        right.setflags(write=False)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @classmethod
    def from_strings(cls, left: str, right: str, mode: str = ANCESTOR) -> "AlignedPair":
        return cls(encode(left), encode(right), mode)

    @property
    def n(self) -> int:
        return int(self.left.shape[0])

    def strings(self) -> tuple[str, str]:
        return decode(self.left), decode(self.right)


def _rng(spec: ExperimentSpec, rng):
    return rng if rng is not None else np.random.default_rng(spec.seed)


def experiment_ancestor(spec: ExperimentSpec, rng=None, backend=None) -> AlignedPair:
    rng = _rng(spec, rng)
    ancestor = sample_stationary(spec.params, spec.n, spec.burn_in, rng, backend)
    return AlignedPair(ancestor, evolve(ancestor, spec.params, spec.t, rng, backend), ANCESTOR)


def experiment_divergence(spec: ExperimentSpec, rng=None, backend=None) -> AlignedPair:
    rng = _rng(spec, rng)
    ancestor = sample_stationary(spec.params, spec.n, spec.burn_in, rng, backend)
    left = evolve(ancestor, spec.params, spec.t, rng, backend)
    right = evolve(ancestor, spec.params, spec.t, rng, backend)
    return AlignedPair(left, right, DIVERGENCE)


def run_experiment(spec: ExperimentSpec, rng=None, backend=None) -> AlignedPair:
    if spec.mode == ANCESTOR:
        return experiment_ancestor(spec, rng, backend)
    return experiment_divergence(spec, rng, backend)


def replicate_rngs(seed: int, count: int) -> list:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]
