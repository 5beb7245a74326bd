"""
Rod geometry: cross-section families and the area weight |D(x1)|.

A rod G is the union over x1 in (l0, l1) of planar sections D(x1). Three
families are supported:

    RectHeights     D(x1) = (-h1, h2) x (-h3, h4), with h_j closed-form functions
    PiecewiseRects  piecewise constant rectangles with nested sections at jumps
    Revolution      discs of radius r(x1)

Closed forms are small sums of terms (polynomials and sin/cos with rational
frequency), see :class:`Expr`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np


class GeometryError(ValueError):
    """Raised for points outside the domain or invalid profiles."""


class Kind(str, Enum):
    RECT_HEIGHTS = "RectHeights"
    PIECEWISE_RECTS = "PiecewiseRects"
    REVOLUTION = "Revolution"


@dataclass(frozen=True)
class Term:
    """One term of a closed-form expression.

    ``kind`` is ``"poly"`` (``coeffs`` are c0, c1, ... in increasing degree),
    ``"sin"`` or ``"cos"`` (``amp * sin(pi * freq * x + pi * phase)``).
    """

    kind: str
    coeffs: tuple[float, ...] = ()
    amp: float = 0.0
    freq: Fraction = Fraction(0)
    phase: Fraction = Fraction(0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "poly":
            return np.polynomial.polynomial.polyval(x, self.coeffs) + 0.0 * x
        arg = math.pi * float(self.freq) * x + math.pi * float(self.phase)
        if self.kind == "sin":
            return self.amp * np.sin(arg)
        if self.kind == "cos":
            return self.amp * np.cos(arg)
        raise GeometryError(f"unknown term kind {self.kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "poly":
            return {"poly": list(self.coeffs)}
        out = {self.kind: {"amp": self.amp, "freq": str(self.freq)}}
        if self.phase:
            out[self.kind]["phase"] = str(self.phase)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Term":
        if len(d) != 1:
            raise GeometryError(f"term must have exactly one key, got {sorted(d)}")
        (kind, val), = d.items()
        if kind == "poly":
            return cls("poly", coeffs=tuple(float(c) for c in val))
        if kind in ("sin", "cos"):
            unknown = set(val) - {"amp", "freq", "phase"}
            if unknown:
                raise GeometryError(f"unknown keys in {kind} term: {sorted(unknown)}")
            return cls(kind, amp=float(val["amp"]),
                       freq=Fraction(str(val.get("freq", 1))),
                       phase=Fraction(str(val.get("phase", 0))))
        raise GeometryError(f"unknown term kind {kind!r}")


@dataclass(frozen=True)
class Expr:
    """Sum of :class:`Term` objects, evaluated elementwise."""

    terms: tuple[Term, ...]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for t in self.terms:
            out = out + t(x)
        return out

    @classmethod
    def const(cls, c: float) -> "Expr":
        return cls((Term("poly", coeffs=(float(c),)),))

    def to_list(self) -> list:
        return [t.to_dict() for t in self.terms]

    @classmethod
    def parse(cls, spec) -> "Expr":
        """Build from a number, a term dict, or a list of term dicts."""
        if isinstance(spec, (int, float)):
            return cls.const(spec)
        if isinstance(spec, dict):
            spec = [spec]
        return cls(tuple(Term.from_dict(d) for d in spec))


@dataclass(frozen=True)
class CrossSectionProfile:
    """Cross-section family of a rod on (l0, l1).

    ``params`` depends on ``kind``:

    * RectHeights: ``{"heights": (h1, h2, h3, h4)}`` with :class:`Expr` entries
    * PiecewiseRects: ``{"breakpoints": (b1, ...), "rects": ((h1, h2, h3, h4), ...)}``
      with one rectangle per segment
    * Revolution: ``{"radius": Expr}``

    The area bounds ``c0``, ``c1`` are sampled at construction.
    """

    kind: Kind
    l0: float
    l1: float
    params: dict
    name: str = "custom"
    c0: float = field(init=False)
    c1: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.l0 < self.l1:
            raise GeometryError(f"need l0 < l1, got ({self.l0}, {self.l1})")
        if self.kind is Kind.PIECEWISE_RECTS:
            self._check_piecewise()
        c0, c1 = area_bounds(self, 1001)
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "c1", c1)

    def _check_piecewise(self):
        bps = tuple(float(b) for b in self.params["breakpoints"])
        rects = tuple(tuple(float(h) for h in r) for r in self.params["rects"])
        if len(rects) != len(bps) + 1 or any(len(r) != 4 for r in rects):
            raise GeometryError("PiecewiseRects needs len(breakpoints) + 1 rectangles of 4 extents")
        pts = (self.l0,) + bps + (self.l1,)
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise GeometryError("breakpoints must be strictly increasing and interior to (l0, l1)")
        for r in rects:
            if r[0] + r[1] <= 0 or r[2] + r[3] <= 0:
                raise GeometryError(f"degenerate rectangle {r}")
        for a, b in zip(rects, rects[1:]):
            if not (_contains(a, b) or _contains(b, a)):
                raise GeometryError(f"sections {a} and {b} are not nested at a jump")
        self.params["breakpoints"] = bps
        self.params["rects"] = rects

    @property
    def breakpoints(self) -> tuple[float, ...]:
        if self.kind is Kind.PIECEWISE_RECTS:
            return self.params["breakpoints"]
        return ()

    @property
    def length(self) -> float:
        return self.l1 - self.l0

    def segment_of(self, x1):
        """Segment index of ``x1`` (right-limit convention, last point in last segment)."""
        bps = np.asarray(self.breakpoints)
        return np.searchsorted(bps, np.asarray(x1, dtype=float), side="right")

    def heights(self, x1) -> np.ndarray:
        """Extents (h1, h2, h3, h4) for the rectangle families, shape (4, ...)."""
        x1 = np.asarray(x1, dtype=float)
        if self.kind is Kind.RECT_HEIGHTS:
            return np.stack([np.broadcast_to(h(x1), x1.shape) for h in self.params["heights"]])
        if self.kind is Kind.PIECEWISE_RECTS:
            rects = np.asarray(self.params["rects"])
            return np.moveaxis(rects[self.segment_of(x1)], -1, 0)
        raise GeometryError("heights() is defined for rectangle families only")

    def radius(self, x1) -> np.ndarray:
        if self.kind is not Kind.REVOLUTION:
            raise GeometryError("radius() is defined for Revolution profiles only")
        x1 = np.asarray(x1, dtype=float)
        return np.broadcast_to(self.params["radius"](x1), x1.shape)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "l0": self.l0, "l1": self.l1}
        if self.kind is Kind.RECT_HEIGHTS:
            d["heights"] = [h.to_list() for h in self.params["heights"]]
        elif self.kind is Kind.PIECEWISE_RECTS:
            d["breakpoints"] = list(self.breakpoints)
            d["rects"] = [list(r) for r in self.params["rects"]]
        else:
            d["radius"] = self.params["radius"].to_list()
        return d


def _contains(big, small) -> bool:
    return all(s <= b for s, b in zip(small, big))


def _check_range(profile: CrossSectionProfile, x1):
    x1 = np.asarray(x1, dtype=float)
    if np.any(x1 < profile.l0) or np.any(x1 > profile.l1) or np.any(~np.isfinite(x1)):
        raise GeometryError(f"x1 outside [{profile.l0}, {profile.l1}]")
    return x1


def _area_unchecked(profile: CrossSectionProfile, x1):
    if profile.kind is Kind.REVOLUTION:
        return math.pi * profile.radius(x1) ** 2
    h = profile.heights(x1)
    return (h[0] + h[1]) * (h[2] + h[3])


def area_at(profile: CrossSectionProfile, x1):
    """Section area |D(x1)|; scalar in, scalar out, arrays broadcast."""
    x1 = _check_range(profile, x1)
    a = _area_unchecked(profile, x1)
    return float(a) if a.ndim == 0 else a


def reference_area(profile: CrossSectionProfile) -> float:
    """Area of the reference section: unit square or unit disc."""
    return math.pi if profile.kind is Kind.REVOLUTION else 1.0


def section_map(profile: CrossSectionProfile, x1: float, ref_pt) -> tuple[float, float]:
    """Image in D(x1) of a point of the reference section.

    Rectangle families map the unit square affinely onto (-h1, h2) x (-h3, h4);
    Revolution scales the unit disc by r(x1).
    """
    x1 = _check_range(profile, x1)
    s, t = (float(v) for v in ref_pt)
    if profile.kind is Kind.REVOLUTION:
        if s * s + t * t > 1.0 + 1e-14:
            raise GeometryError(f"{ref_pt} outside the unit disc")
        r = float(profile.radius(x1))
        return (r * s, r * t)
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise GeometryError(f"{ref_pt} outside the unit square")
    h1, h2, h3, h4 = (float(v) for v in profile.heights(x1))
    return (-h1 + s * (h1 + h2), -h3 + t * (h3 + h4))


def section_jacobian(profile: CrossSectionProfile, x1: float) -> float:
    """Determinant of the derivative of ``section_map`` with respect to ``ref_pt``."""
    x1 = _check_range(profile, x1)
    if profile.kind is Kind.REVOLUTION:
        return float(profile.radius(x1)) ** 2
    h1, h2, h3, h4 = (float(v) for v in profile.heights(x1))
    return (h1 + h2) * (h3 + h4)


def area_bounds(profile: CrossSectionProfile, n_samples: int = 1001) -> tuple[float, float]:
    """Sampled (min, max) of the area, including one-sided limits at breakpoints."""
    if n_samples < 2:
        raise GeometryError("n_samples must be >= 2")
    xs = [np.linspace(profile.l0, profile.l1, n_samples)]
    bps = profile.breakpoints
    if bps:
        # left limits at jumps: evaluate just inside each left segment
        rects = np.asarray(profile.params["rects"])
        left = (rects[:-1, 0] + rects[:-1, 1]) * (rects[:-1, 2] + rects[:-1, 3])
        xs.append(np.asarray(bps))
    else:
        left = np.empty(0)
    if profile.kind is Kind.RECT_HEIGHTS:
        h = profile.heights(xs[0])
        if np.any(h <= 0):
            raise GeometryError("all heights h_j must be strictly positive")
    if profile.kind is Kind.REVOLUTION and np.any(profile.radius(xs[0]) <= 0):
        raise GeometryError("radius must be strictly positive")
    a = np.concatenate([_area_unchecked(profile, x) for x in xs] + [left])
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise GeometryError("section area must be strictly positive")
    return float(a.min()), float(a.max())


def rect_heights(h1, h2, h3, h4, l0: float = 0.0, l1: float = 1.0,
                 name: str = "custom") -> CrossSectionProfile:
    hs = tuple(h if isinstance(h, Expr) else Expr.parse(h) for h in (h1, h2, h3, h4))
    return CrossSectionProfile(Kind.RECT_HEIGHTS, l0, l1, {"heights": hs}, name=name)


def piecewise_rects(breakpoints: Sequence[float], rects, l0: float = 0.0, l1: float = 1.0,
                    name: str = "custom") -> CrossSectionProfile:
    return CrossSectionProfile(Kind.PIECEWISE_RECTS, l0, l1,
                               {"breakpoints": tuple(breakpoints), "rects": tuple(rects)}, name=name)


def revolution(radius, l0: float = 0.0, l1: float = 1.0, name: str = "custom") -> CrossSectionProfile:
    r = radius if isinstance(radius, Expr) else Expr.parse(radius)
    return CrossSectionProfile(Kind.REVOLUTION, l0, l1, {"radius": r}, name=name)


def _sin(amp, freq=1):
    return Term("sin", amp=amp, freq=Fraction(freq))


def preset(name: str) -> CrossSectionProfile:
    """Named profiles on (0, 1) for the domain families of the figures."""
    if name == "constant":
        return rect_heights(0.25, 0.25, 0.25, 0.25, name=name)
    if name == "two_cuboids":
        return piecewise_rects([0.5], [(0.5, 0.5, 0.5, 0.5), (0.25, 0.25, 0.25, 0.25)], name=name)
    if name == "dome":
        # area 1 + sin(pi x)/2 on a 1.2-wide section
        top = Expr((Term("poly", coeffs=(5 / 12,)), _sin(5 / 12)))
        return rect_heights(0.6, 0.6, 5 / 12, top, name=name)
    if name == "wavy":
        top = Expr((Term("poly", coeffs=(0.5,)), _sin(0.25, 4)))
        return rect_heights(0.5, 0.5, 0.5, top, name=name)
    if name == "trumpet":
        return revolution(Expr((Term("poly", coeffs=(0.3, 0.0, 0.3)),)), name=name)
    raise GeometryError(f"unknown preset {name!r}; choose from {PRESETS}")


PRESETS = ("constant", "two_cuboids", "dome", "wavy", "trumpet")


def profile_from_dict(d) -> CrossSectionProfile:
    """Profile from a preset name or an inline family description."""
    if isinstance(d, str):
        return preset(d)
    d = dict(d)
    if "preset" in d:
        if len(d) != 1:
            raise GeometryError("'preset' cannot be combined with other profile keys")
        return preset(d["preset"])
    kind = Kind(d.pop("kind"))
    l0, l1 = float(d.pop("l0", 0.0)), float(d.pop("l1", 1.0))
    name = d.pop("name", "custom")
    expected = {Kind.RECT_HEIGHTS: {"heights"}, Kind.PIECEWISE_RECTS: {"breakpoints", "rects"},
                Kind.REVOLUTION: {"radius"}}[kind]
    if set(d) != expected:
        raise GeometryError(f"{kind.value} profile needs keys {sorted(expected)}, got {sorted(d)}")
    if kind is Kind.RECT_HEIGHTS:
        if len(d["heights"]) != 4:
            raise GeometryError("RectHeights needs four heights")
        return rect_heights(*(Expr.parse(h) for h in d["heights"]), l0=l0, l1=l1, name=name)
    if kind is Kind.PIECEWISE_RECTS:
        return piecewise_rects(d["breakpoints"], d["rects"], l0=l0, l1=l1, name=name)
    return revolution(Expr.parse(d["radius"]), l0=l0, l1=l1, name=name)
