"""Substitution parameters and encoded finite-state chains.

Nucleotides are coded as integers in the order ``A, T, C, G``. A sequence
evolves under an RN single-site rate matrix plus YpR dinucleotide
influence; small windows of the sequence, once their boundary letters are
collapsed into suitable classes, evolve as autonomous Markov chains. This
module builds those chains either by generic lumping of the per-site rate
rule or from the hand-written 4-state and 9-state generators.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

LETTERS = "ATCG"
CODE = {x: i for i, x in enumerate(LETTERS)}
PURINES = frozenset("AG")
PYRIMIDINES = frozenset("TC")

# Dinucleotide substitutions "XY2ZW" with extra rates under YpR influence.
YPR_TRANSITIONS = (
    "CG2CA",
    "CG2TG",
    "TA2CA",
    "TA2TG",
    "CA2CG",
    "CA2TA",
    "TG2CG",
    "TG2TA",
)

# r^x_v notation: x is the unchanged neighbour, v the new letter.
SUPERSCRIPT_NAMES = {
    ("C", "A"): "CG2CA",
    ("G", "T"): "CG2TG",
    ("A", "C"): "TA2CA",
    ("T", "G"): "TA2TG",
    ("C", "G"): "CA2CG",
    ("A", "T"): "CA2TA",
    ("G", "C"): "TG2CG",
    ("T", "A"): "TG2TA",
}

NOT = "~"


class InvalidParams(ValueError):
    pass


@dataclass(frozen=True)
class SubstitutionParams:
    """Rates of an RN+YpR model.

    ``v_*`` are transversion rates and ``w_*`` transition rates, both
    indexed by the target letter. ``ypr`` holds the eight YpR rates in the
    order of :data:`YPR_TRANSITIONS`.
    """

    v_A: float = 1.0
    v_T: float = 1.0
    v_C: float = 1.0
    v_G: float = 1.0
    w_A: float = 1.0
    w_T: float = 1.0
    w_C: float = 1.0
    w_G: float = 1.0
    ypr: tuple = field(default=(0.0,) * 8)

    def __post_init__(self):
        ypr = tuple(float(x) for x in self.ypr)
        if len(ypr) != 8:
            raise InvalidParams("ypr must hold exactly 8 rates")
        object.__setattr__(self, "ypr", ypr)
        rates = [self.v(x) for x in LETTERS] + [self.w(x) for x in LETTERS]
        if any(not np.isfinite(x) or x < 0 for x in rates + list(ypr)):
            raise InvalidParams("rates must be finite and nonnegative")
        if any(self.v(x) <= 0 for x in LETTERS):
            raise InvalidParams("all v rates must be positive (ergodicity)")

    @classmethod
    def from_mapping(cls, rates: Mapping[str, float]) -> "SubstitutionParams":
        """Build from ``{"v_A": .., "CG2CA": ..}``; missing keys default."""
        unknown = set(rates) - set(PARAM_KEYS) - set(YPR_TRANSITIONS)
        if unknown:
            raise InvalidParams(f"unknown rate keys: {sorted(unknown)}")
        single = {k: float(v) for k, v in rates.items() if k in PARAM_KEYS}
        ypr = tuple(float(rates.get(k, 0.0)) for k in YPR_TRANSITIONS)
        return cls(**single, ypr=ypr)

    def v(self, letter: str) -> float:
        return getattr(self, "v_" + letter)

    def w(self, letter: str) -> float:
        return getattr(self, "w_" + letter)

    def ypr_rate(self, name: str) -> float:
        return self.ypr[YPR_TRANSITIONS.index(name)]

    @property
    def ypr_rates(self) -> dict:
        return dict(zip(YPR_TRANSITIONS, self.ypr))

    def r(self, neighbour: str, target: str) -> float:
        """YpR rate in superscript notation, r^neighbour_target."""
        return self.ypr_rate(SUPERSCRIPT_NAMES[neighbour, target])

    @property
    def jc_cpg_r(self) -> float | None:
        """The CpG rate if these are JC+CpG parameters, else None."""
        singles = [self.v(x) for x in LETTERS] + [self.w(x) for x in LETTERS]
        r = self.ypr_rate("CG2CA")
        others = [x for k, x in self.ypr_rates.items() if k not in ("CG2CA", "CG2TG")]
        if all(x == 1.0 for x in singles) and self.ypr_rate("CG2TG") == r and not any(others):
            return r
        return None

    def as_mapping(self) -> dict:
        out = {k: getattr(self, k) for k in PARAM_KEYS}
        out.update(self.ypr_rates)
        return out


PARAM_KEYS = tuple(f"{p}_{x}" for p in "vw" for x in LETTERS)


def jc_cpg_params(r: float) -> SubstitutionParams:
    """Jukes-Cantor rates with CG->CA and CG->TG raised by ``r``."""
    if not r >= 0:
        raise InvalidParams(f"CpG rate must be nonnegative, got {r}")
    ypr = tuple(float(r) if k in ("CG2CA", "CG2TG") else 0.0 for k in YPR_TRANSITIONS)
    return SubstitutionParams(ypr=ypr)


def read_params(path) -> SubstitutionParams:
    """Parse a ``key = value`` parameter file.

    Keys are ``v_A .. w_G`` and ``rCG2CA .. rTG2TA``; ``jc_cpg_r`` is a
    shorthand that cannot be combined with explicit rates.
    """
    entries = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise InvalidParams(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip()
            if key in entries:
                raise InvalidParams(f"{path}:{lineno}: duplicate key {key!r}")
            try:
                entries[key] = float(value)
            except ValueError:
                raise InvalidParams(f"{path}:{lineno}: bad number {value.strip()!r}") from None
    if "jc_cpg_r" in entries:
        if len(entries) > 1:
            raise InvalidParams("jc_cpg_r conflicts with explicit rate keys")
        return jc_cpg_params(entries["jc_cpg_r"])
    rates = {}
    for key, value in entries.items():
        if key.startswith("r") and key[1:] in YPR_TRANSITIONS:
            rates[key[1:]] = value
        elif key in PARAM_KEYS:
            rates[key] = value
        else:
            raise InvalidParams(f"unknown parameter key {key!r}")
    return SubstitutionParams.from_mapping(rates)


def write_params(params: SubstitutionParams, path) -> None:
    with open(path, "w") as fh:
        for key, value in params.as_mapping().items():
            prefix = "r" if key in YPR_TRANSITIONS else ""
            fh.write(f"{prefix}{key} = {value!r}\n")


def _ypr_increment(params, left, x, right, y):
    rate = 0.0
    for name, value in zip(YPR_TRANSITIONS, params.ypr):
        if not value:
            continue
        src, dst = name[:2], name[3:]
        if src[0] != dst[0]:
            # first letter of the dinucleotide changes; right neighbour is context
            if x == src[0] and y == dst[0] and right == src[1]:
                rate += value
        elif left == src[0] and x == src[1] and y == dst[1]:
            rate += value
    return rate


def site_rate(params: SubstitutionParams, left: str, x: str, right: str, y: str) -> float:
    """Rate at which a site holding ``x`` between ``left`` and ``right`` becomes ``y``."""
    if x == y:
        raise ValueError("site_rate needs x != y")
    for letter in (left, x, right, y):
        if letter not in CODE:
            raise ValueError(f"not a nucleotide: {letter!r}")
    transition = (x in PURINES) == (y in PURINES)
    base = params.w(y) if transition else params.v(y)
    return base + _ypr_increment(params, left, x, right, y)


@lru_cache(maxsize=64)
def rate_table(params: SubstitutionParams) -> np.ndarray:
    """``table[left, x, right, y]`` of site rates, zero on ``x == y``."""
    table = np.zeros((4, 4, 4, 4))
    for l, x, r, y in itertools.product(LETTERS, repeat=4):
        if x != y:
            table[CODE[l], CODE[x], CODE[r], CODE[y]] = site_rate(params, l, x, r, y)
    table.setflags(write=False)
    return table


def max_total_site_rate(params: SubstitutionParams) -> float:
    return float(rate_table(params).sum(axis=3).max())


@dataclass(frozen=True, eq=False)
class EncodedChain:
    """A finite CTMC over encoded words.

    ``coords[k]`` gives the per-coordinate class names of state ``k``; a
    state's label is the concatenation of those names.
    """

    labels: tuple
    generator: np.ndarray
    stationary: np.ndarray
    coords: tuple = ()

    def __post_init__(self):
        self.generator.setflags(write=False)
        self.stationary.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def indices(self, states: Iterable) -> np.ndarray:
        """Accept labels or integer indices."""
        out = [s if isinstance(s, (int, np.integer)) else self.index(s) for s in states]
        return np.asarray(out, dtype=int)

    def select(self, constraints: Mapping[int, str]) -> np.ndarray:
        """Indices of states whose coordinate classes match ``constraints``."""
        return np.array(
            [k for k, c in enumerate(self.coords) if all(c[j] == name for j, name in constraints.items())],
            dtype=int,
        )


def stationary_distribution(generator: np.ndarray) -> np.ndarray:
    """Normalised left null vector of a generator matrix."""
    basis = scipy.linalg.null_space(generator.T, rcond=1e-10)
    if basis.shape[1] != 1:
        raise ValueError(f"generator has a {basis.shape[1]}-dimensional left null space")
    pi = basis[:, 0]
    pi = pi / pi.sum()
    if pi.min() < -1e-12:
        raise ValueError("stationary vector has negative entries")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _finish(labels, coords, rates) -> EncodedChain:
    gen = np.array(rates, dtype=float)
    np.fill_diagonal(gen, 0.0)
    np.fill_diagonal(gen, -gen.sum(axis=1))
    return EncodedChain(tuple(labels), gen, stationary_distribution(gen), tuple(coords))


def check_generator(gen: np.ndarray, atol: float = 1e-12) -> float:
    """Largest violation of the generator conditions (0 when valid)."""
    off = gen - np.diag(np.diag(gen))
    return max(float(-off.min(initial=0.0)), float(np.abs(gen.sum(axis=1)).max()))


# An encoding is a sequence of per-coordinate partitions: {class name: letters}.
Partition = Mapping[str, str]


def lumped_chain(params: SubstitutionParams, encoding: Sequence[Partition], atol: float = 1e-12) -> EncodedChain:
    """Derive the chain of a window of sites from :func:`site_rate`.

    Letters outside the window range over the whole alphabet. Raises
    ``ValueError`` when the encoding is not lumpable for ``params``, i.e.
    when a class-to-class rate depends on a letter hidden by the encoding.
    """
    table = rate_table(params)
    width = len(encoding)
    names = [list(p) for p in encoding]
    coords = list(itertools.product(*names))
    index = {c: k for k, c in enumerate(coords)}
    gen = np.zeros((len(coords), len(coords)))
    everything = [CODE[x] for x in LETTERS]
    for state in coords:
        members = [[CODE[x] for x in encoding[j][name]] for j, name in enumerate(state)]
        for j in range(width):
            lefts = members[j - 1] if j > 0 else everything
            rights = members[j + 1] if j < width - 1 else everything
            for target in names[j]:
                if target == state[j]:
                    continue
                ys = [CODE[y] for y in encoding[j][target]]
                values = {
                    float(table[l, x, r, ys].sum())
                    for l in lefts
                    for x in members[j]
                    for r in rights
                }
                lo, hi = min(values), max(values)
                if hi - lo > atol:
                    raise ValueError(
                        f"encoding not lumpable: rate {state}->{target} at coordinate {j} ranges over [{lo}, {hi}]"
                    )
                new = state[:j] + (target,) + state[j + 1:]
                gen[index[state], index[new]] = lo
    labels = ["".join(c) for c in coords]
    return _finish(labels, coords, gen)


LEFT_EDGE = {"R": "AG", "T": "T", "C": "C"}
RIGHT_EDGE = {"Y": "TC", "G": "G", "A": "A"}
FULL = {x: x for x in LETTERS}


def window_encoding(width: int) -> list:
    """{R,T,C} x A^(width-2) x {Y,G,A}."""
    return [LEFT_EDGE] + [FULL] * (width - 2) + [RIGHT_EDGE]


@lru_cache(maxsize=32)
def build_windowed(params: SubstitutionParams, width: int) -> EncodedChain:
    """Autonomous chain of a window of ``width`` sites (2, 3 or 4)."""
    if width not in (2, 3, 4):
        raise ValueError(f"window width must be 2, 3 or 4, got {width}")
    return lumped_chain(params, window_encoding(width))


def nine_state_rate(params: SubstitutionParams, a: str, b: str) -> float:
    """Entry of the 9-state generator between dinucleotide codes ``a != b``.

    Codes are two characters over {R,T,C} x {Y,G,A}. The entry for a purine
    moving into Y is taken as v_Y = v_T + v_C.
    """
    (u, x), (u2, x2) = a, b
    if u != u2 and x != x2:
        return 0.0
    v_R = params.v_A + params.v_G
    v_Y = params.v_T + params.v_C
    if x == x2:
        if u == "R":
            return params.v(u2)
        if u2 == "R":
            return v_R
        rate = params.w(u2)
        if x != "Y":
            rate += params.r(x, u2)
        return rate
    if x == "Y":
        return params.v(x2)
    if x2 == "Y":
        return v_Y
    rate = params.w(x2)
    if u != "R":
        rate += params.r(u, x2)
    return rate


@lru_cache(maxsize=32)
def build_nine_state(params: SubstitutionParams) -> EncodedChain:
    """The {R,T,C} x {Y,G,A} dinucleotide chain, entry by entry."""
    coords = list(itertools.product("RTC", "YGA"))
    labels = ["".join(c) for c in coords]
    gen = np.zeros((9, 9))
    for i, a in enumerate(labels):
        for j, b in enumerate(labels):
            if i != j:
                gen[i, j] = nine_state_rate(params, a, b)
    return _finish(labels, coords, gen)


FOUR_STATE_LABELS = ("CG", "~CG", "~C~G", "C~G")


@lru_cache(maxsize=32)
def build_four_state_jc(r: float) -> EncodedChain:
    """The {C, not C} x {G, not G} chain of the JC+CpG model."""
    if not r >= 0:
        raise InvalidParams(f"CpG rate must be nonnegative, got {r}")
    s = 3.0 + r
    gen = np.array(
        [
            [0.0, s, 0.0, s],
            [1.0, 0.0, 3.0, 0.0],
            [0.0, 1.0, 0.0, 1.0],
            [1.0, 0.0, 3.0, 0.0],
        ]
    )
    coords = [("C", "G"), ("~C", "G"), ("~C", "~G"), ("C", "~G")]
    return _finish(FOUR_STATE_LABELS, coords, gen)


CG_ENCODING = [{"C": "C", "~C": "ATG"}, {"G": "G", "~G": "ATC"}]
CAGY_ENCODING = [{"C": "C", "~C": "ATG"}, {"A": "A", "G": "G", "Y": "TC"}]


@lru_cache(maxsize=32)
def build_six_state_jc(r: float) -> EncodedChain:
    """The {C, not C} x {A, G, Y} chain of the JC+CpG model."""
    return lumped_chain(jc_cpg_params(r), CAGY_ENCODING)


def lump_generator(chain: EncodedChain, groups: Sequence[Sequence[str]], atol: float = 1e-12) -> np.ndarray:
    """Aggregate ``chain`` onto a partition of its labels.

    Raises ``ValueError`` if members of a group disagree on their rate
    into another group (the partition is not lumpable).
    """
    idx = [chain.indices(g) for g in groups]
    out = np.zeros((len(groups), len(groups)))
    for a, src in enumerate(idx):
        for b, dst in enumerate(idx):
            rates = chain.generator[np.ix_(src, dst)].sum(axis=1)
            if a != b and np.ptp(rates) > atol:
                raise ValueError(f"groups {a}->{b} are not lumpable")
            out[a, b] = rates[0]
    np.fill_diagonal(out, 0.0)
    np.fill_diagonal(out, -out.sum(axis=1))
    return out


def kolmogorov_cycle_ratio(chain: EncodedChain, cycle: Sequence[str]) -> float:
    """Product of rates around ``cycle`` divided by the reverse product."""
    idx = chain.indices(cycle)
    gen = chain.generator
    forward = np.prod([gen[idx[k], idx[(k + 1) % len(idx)]] for k in range(len(idx))])
    backward = np.prod([gen[idx[(k + 1) % len(idx)], idx[k]] for k in range(len(idx))])
    return float(forward / backward)


def detailed_balance_residual(chain: EncodedChain) -> float:
    flux = chain.stationary[:, None] * chain.generator
    return float(np.abs(flux - flux.T).max())
