"""Turn measurements into model inputs.

Two kinds of measurements feed the oracle: collective micro-benchmarks, from
which per-tier latency and bandwidth are fitted, and per-layer compute
timings (forward/backward per sample, weight update per iteration).
"""

from __future__ import annotations

import csv
import enum
import io
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cost import NetworkTier
from .errors import DegenerateFit, InsufficientSamples, MissingTiming, ParseError

DEFAULT_KEY = "*"


class Pattern(enum.Enum):
    ALLREDUCE = "allreduce"
    ALLGATHER = "allgather"
    P2P = "p2p"


@dataclass(frozen=True)
class BenchmarkSample:
    pattern: Pattern
    p: int
    m: float
    t: float

    def __post_init__(self) -> None:
        if self.t <= 0:
            raise ValueError("benchmark time must be > 0")
        if self.m < 0:
            raise ValueError("message size must be >= 0")
        if self.pattern is not Pattern.P2P and self.p < 2:
            raise ValueError("collective benchmarks need p >= 2")


@dataclass(frozen=True)
class LayerTiming:
    name: str
    fw: float
    bw: float
    wu: float = 0.0

    def __post_init__(self) -> None:
        if min(self.fw, self.bw, self.wu) < 0:
            raise ValueError(f"{self.name}: timings must be >= 0")


@dataclass(frozen=True)
class CalibrationProfile:
    timings: Mapping[str, LayerTiming]
    tiers: tuple[NetworkTier, ...] = ()
    default: LayerTiming | None = None

    def __post_init__(self) -> None:
        timings = dict(self.timings)
        default = self.default
        if default is None and DEFAULT_KEY in timings:
            default = timings[DEFAULT_KEY]
        timings.pop(DEFAULT_KEY, None)
        object.__setattr__(self, "timings", timings)
        object.__setattr__(self, "default", default)
        object.__setattr__(self, "tiers", tuple(self.tiers))

    def timing(self, layer_name: str) -> LayerTiming:
        try:
            return self.timings[layer_name]
        except KeyError:
            if self.default is None:
                raise MissingTiming(f"no timing for layer {layer_name!r} and no default row") from None
            return self.default

    def check_covers(self, names: Iterable[str]) -> None:
        if self.default is not None:
            return
        missing = [n for n in names if n not in self.timings]
        if missing:
            raise MissingTiming(f"no timings for layers {missing}")

    @classmethod
    def uniform(cls, fw: float, bw: float, wu: float = 0.0) -> CalibrationProfile:
        return cls({}, default=LayerTiming(DEFAULT_KEY, fw, bw, wu))


# ---------------------------------------------------------------------------
# alpha/beta fitting

def features(pattern: Pattern, p: int, m: float) -> tuple[float, float]:
    """Coefficients of (alpha, beta) in the pattern's closed-form time."""
    if pattern is Pattern.ALLREDUCE:
        return 2.0 * (p - 1), 2.0 * (p - 1) * m / p
    if pattern is Pattern.ALLGATHER:
        return float(p - 1), float(p - 1) * m
    return 1.0, float(m)


def fit_alpha_beta(
    samples: Sequence[BenchmarkSample],
    pattern: Pattern | str,
    tier_pe_range: tuple[int, int] | None = None,
) -> tuple[float, float]:
    """Least-squares (alpha, beta) for one pattern and PE range (inclusive).

    A negative intercept is clamped by refitting beta alone with alpha = 0.
    """
    pattern = Pattern(pattern)
    chosen = [s for s in samples if s.pattern is pattern]
    if tier_pe_range is not None:
        lo, hi = tier_pe_range
        chosen = [s for s in chosen if lo <= s.p <= hi]
    if len(chosen) < 2:
        raise InsufficientSamples(f"{pattern.value}: need >= 2 samples, got {len(chosen)}")
    A = np.array([features(pattern, s.p, s.m) for s in chosen], dtype=float)
    t = np.array([s.t for s in chosen], dtype=float)
    # the two columns differ by many orders of magnitude; scale before solving
    scale = np.abs(A).max(axis=0)
    if np.any(scale == 0):
        raise DegenerateFit(f"{pattern.value}: a feature column is identically zero")
    As = A / scale
    coef, _, rank, sv = np.linalg.lstsq(As, t, rcond=None)
    if rank < 2 or sv[-1] <= 1e-12 * sv[0]:
        raise DegenerateFit(f"{pattern.value}: features are collinear (identical message sizes?)")
    # one step of iterative refinement buys back the digits lost to rounding
    resid = t - As @ coef
    coef = coef + np.linalg.lstsq(As, resid, rcond=None)[0]
    alpha, beta = coef / scale
    if alpha < 0:
        x = A[:, 1]
        alpha, beta = 0.0, float(x @ t / (x @ x))
    if beta <= 0:
        raise DegenerateFit(f"{pattern.value}: fitted beta {beta} is not positive")
    return float(alpha), float(beta)


def fit_tiers(
    samples: Sequence[BenchmarkSample], pattern: Pattern | str, tiers: Sequence[NetworkTier]
) -> list[NetworkTier]:
    """Refit every tier from the samples whose p falls inside it.

    Tier i owns p in (max_pes of tier i-1, max_pes of tier i].
    """
    out = []
    lo = 1
    for tier in tiers:
        alpha, beta = fit_alpha_beta(samples, pattern, (lo, tier.max_pes))
        out.append(NetworkTier(tier.name, tier.max_pes, alpha, beta))
        lo = tier.max_pes + 1
    return out


# ---------------------------------------------------------------------------
# CSV loaders

def _rows(text: str, header_first: str):
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        row = [c.strip() for c in row]
        if lineno == 1 and row[0].lower() == header_first:
            continue
        yield lineno, row


def _float(text: str, line: int, field: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"expected a number, got {text!r}", line, field) from None


def load_layer_timings(text: str) -> dict[str, LayerTiming]:
    """Parse ``layer,fw_s_per_sample,bw_s_per_sample,wu_s_per_iter`` rows.

    A row named ``*`` is the default for layers without their own row.
    Missing WU defaults to 0 and duplicate names keep the last row; both warn.
    """
    out: dict[str, LayerTiming] = {}
    for lineno, row in _rows(text, "layer"):
        if len(row) not in (3, 4):
            raise ParseError(f"expected 3 or 4 columns, got {len(row)}", lineno)
        name = row[0]
        fw = _float(row[1], lineno, "fw_s_per_sample")
        bw = _float(row[2], lineno, "bw_s_per_sample")
        if len(row) == 4 and row[3] != "":
            wu = _float(row[3], lineno, "wu_s_per_iter")
        else:
            warnings.warn(f"line {lineno}: no WU time for {name!r}, using 0", stacklevel=2)
            wu = 0.0
        if name in out:
            warnings.warn(f"line {lineno}: duplicate timing for {name!r}, keeping the last", stacklevel=2)
        try:
            out[name] = LayerTiming(name, fw, bw, wu)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return out


def load_benchmarks(text: str) -> list[BenchmarkSample]:
    """Parse ``pattern,p,bytes,seconds`` rows."""
    out = []
    for lineno, row in _rows(text, "pattern"):
        if len(row) != 4:
            raise ParseError(f"expected 4 columns, got {len(row)}", lineno)
        try:
            pattern = Pattern(row[0].lower())
        except ValueError:
            raise ParseError(f"unknown pattern {row[0]!r}", lineno, "pattern") from None
        p = _float(row[1], lineno, "p")
        if p != int(p):
            raise ParseError("p must be an integer", lineno, "p")
        try:
            out.append(BenchmarkSample(pattern, int(p), _float(row[2], lineno, "bytes"), _float(row[3], lineno, "seconds")))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return out


def load_profile(timings_path, tiers: Sequence[NetworkTier] = ()) -> CalibrationProfile:
    with open(timings_path, encoding="utf-8") as fh:
        return CalibrationProfile(load_layer_timings(fh.read()), tiers=tuple(tiers))

