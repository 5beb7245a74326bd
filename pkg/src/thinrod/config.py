"""
Run configuration: a strict JSON schema with scalar overrides from the command line.

Example::

    {"profile": "dome", "bc": "mixed", "eps": [0.4, 0.2, 0.1, 0.05], "k": 4,
     "n1": 128, "n_sec": 8, "n_cells": 10000, "tol": 1e-10, "seed": 0,
     "output": "out", "formats": ["csv", "json", "svg"]}

``profile`` is a preset name or an inline family description (see
:func:`thinrod.geometry.profile_from_dict`).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

from .eigensolve import DEFAULT_TOL
from .fem import BC
from .geometry import CrossSectionProfile, profile_from_dict
from .harness import DEFAULT_EPS, ResolutionPolicy, _check_eps_list

FORMATS = ("csv", "json", "svg", "mesh", "coo")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    profile: str | dict = "constant"
    bc: str = "mixed"
    eps: tuple[float, ...] = DEFAULT_EPS
    k: int = 4
    n1: int = 128
    n_sec: int = 8
    n_cells: int = 10_000
    tol: float = DEFAULT_TOL
    seed: int = 0
    output: str = "out"
    formats: tuple[str, ...] = ("csv", "json", "svg")
    policy: str = "fixed"
    coarse: bool = False
    _profile: CrossSectionProfile | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        try:
            self._validate()
        except ConfigError:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    def _validate(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("bc", BC.parse(self.bc).value)
        eps = (self.eps,) if isinstance(self.eps, (int, float)) else self.eps
        set_("eps", tuple(_check_eps_list(eps)))
        for name in ("k", "n1", "n_sec", "n_cells", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{name} must be an integer, got {v!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.n1 < 2 or self.n_sec < 1 or self.n_cells < 2:
            raise ConfigError("need n1 >= 2, n_sec >= 1 and n_cells >= 2")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if not float(self.tol) > 0:
            raise ConfigError("tol must be positive")
        set_("tol", float(self.tol))
        formats = (self.formats,) if isinstance(self.formats, str) else tuple(self.formats)
        bad = set(formats) - set(FORMATS)
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}; choose from {FORMATS}")
        set_("formats", formats)
        ResolutionPolicy(self.n1, self.n_sec, self.n_cells, self.policy)
        if not isinstance(self.coarse, bool):
            raise ConfigError("coarse must be true or false")
        set_("_profile", profile_from_dict(self.profile))

    @property
    def profile_obj(self) -> CrossSectionProfile:
        return self._profile

    @property
    def profile_id(self) -> str:
        p = self.profile
        if isinstance(p, str):
            return p
        return p.get("preset", p.get("name", "custom"))

    @property
    def resolution(self) -> ResolutionPolicy:
        return ResolutionPolicy(self.n1, self.n_sec, self.n_cells, self.policy)

    def override(self, **kw) -> "RunConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw) if kw else self

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("_profile")
        d["eps"], d["formats"] = list(self.eps), list(self.formats)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls) if not f.name.startswith("_")}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d)
