"""JSON configuration documents and their validation."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigurationError
from .honest_noise import HonestNoise
from .utility import UtilitySyntaxError, parse_utility

BUILTIN_CONFIGS = ("example1", "example2", "example3", "fig3")


def _where(path: str, msg: str) -> ConfigurationError:
    return ConfigurationError(f"{path}: {msg}" if path else msg)


def load_document(source: str | Path | dict) -> dict:
    """Read a config from a path, a builtin name (``example1``...) or a dict."""
    if isinstance(source, dict):
        return copy.deepcopy(source)
    text_source = str(source)
    path = Path(text_source)
    if not path.exists() and text_source in BUILTIN_CONFIGS:
        text = resources.files("gamecoding.configs").joinpath(f"{text_source}.json").read_text()
        origin = f"builtin:{text_source}"
    else:
        if not path.exists():
            raise ConfigurationError(f"config file not found: {text_source}")
        text = path.read_text()
        origin = text_source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{origin}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigurationError(f"{origin}: top level must be a JSON object")
    doc.setdefault("_base_dir", str(path.parent) if path.exists() else ".")
    return doc


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply ``a.b.c=value`` overrides; values are parsed as JSON when possible."""
    for item in overrides or []:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.strip().split(".")
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        node[parts[-1]] = value
    return doc


def get_number(doc: dict, key: str, path: str = "", *, required=True, default=None,
               positive=False, allow_null=False) -> float | None:
    if key not in doc or (doc[key] is None and allow_null):
        if required and key not in doc:
            raise _where(f"{path}{key}", "missing required field")
        return default if key not in doc else None
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise _where(f"{path}{key}", f"expected a number, got {v!r}")
    v = float(v)
    if not np.isfinite(v) or (positive and v <= 0):
        raise _where(f"{path}{key}", f"expected a positive finite number, got {v!r}")
    return v


def make_grid(spec: Any, path: str) -> np.ndarray:
    """Inclusive arithmetic grid ``{min, min+step, ..., max}`` or an explicit list."""
    if isinstance(spec, list):
        try:
            arr = np.array([float(v) for v in spec])
        except (TypeError, ValueError):
            raise _where(path, "grid list must contain numbers") from None
        if arr.size == 0:
            raise _where(path, "grid is empty")
        if np.any(np.diff(arr) <= 0):
            raise _where(path, "grid must be strictly ascending")
        return arr
    if not isinstance(spec, dict):
        raise _where(path, "expected {min, max, step} or a list")
    lo = get_number(spec, "min", path + ".")
    hi = get_number(spec, "max", path + ".")
    step = get_number(spec, "step", path + ".", positive=True)
    if hi < lo:
        raise _where(path, "grid is empty (max < min)")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 12)


def make_noise(doc: dict, base_dir: str = ".") -> HonestNoise:
    delta = get_number(doc, "delta", "", required=False, default=None, positive=True)
    spec = doc.get("honest_noise", {"kind": "uniform"})
    if not isinstance(spec, dict):
        raise _where("honest_noise", "expected an object")
    kind = spec.get("kind", "uniform")
    if kind == "uniform":
        d = get_number(spec, "delta", "honest_noise.", required=False, default=None, positive=True)
        if d is not None and delta is not None and d != delta:
            raise _where("honest_noise.delta", f"conflicts with delta={delta!r}")
        return HonestNoise.uniform(d or delta or 1.0)
    if kind == "tabulated":
        normalize = bool(spec.get("normalize", False))
        if "csv" in spec:
            p = Path(spec["csv"])
            if not p.is_absolute():
                p = Path(base_dir) / p
            noise = HonestNoise.from_csv(p, normalize=normalize)
        elif "table" in spec:
            try:
                arr = np.array(spec["table"], dtype=float)
            except (TypeError, ValueError):
                raise _where("honest_noise.table", "expected [[x, density], ...]") from None
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise _where("honest_noise.table", "expected [[x, density], ...]")
            noise = HonestNoise.tabulated(arr[:, 0], arr[:, 1], normalize=normalize)
        else:
            raise _where("honest_noise", "tabulated noise needs 'csv' or 'table'")
        if delta is not None and abs(noise.delta - delta) > 1e-12 * delta:
            raise _where("delta", f"{delta!r} disagrees with the table's support {noise.delta!r}")
        return noise
    raise _where("honest_noise.kind", f"unknown kind {kind!r}")


@dataclass
class SolveConfig:
    noise: HonestNoise
    eta_grid: np.ndarray
    alpha_grid: np.ndarray
    u_ad: str
    u_dc: str
    M: float | None = None
    n_samples: int = 4096
    tie_tol: float = 1e-9
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def delta(self) -> float:
        return self.noise.delta

    @classmethod
    def from_document(cls, doc: dict) -> "SolveConfig":
        noise = make_noise(doc, doc.get("_base_dir", "."))
        for key in ("eta_grid", "alpha_grid", "u_ad", "u_dc"):
            if key not in doc:
                raise _where(key, "missing required field")
        eta_grid = make_grid(doc["eta_grid"], "eta_grid")
        alpha_grid = make_grid(doc["alpha_grid"], "alpha_grid")
        if eta_grid[0] < 2.0:
            raise _where("eta_grid", "eta must be >= 2")
        if alpha_grid[0] <= 0.0 or alpha_grid[-1] > 1.0 + 1e-12:
            raise _where("alpha_grid", "alpha must lie in (0, 1]")
        alpha_grid = np.minimum(alpha_grid, 1.0)
        for key in ("u_ad", "u_dc"):
            if not isinstance(doc[key], str):
                raise _where(key, "expected an expression string")
            try:
                parse_utility(doc[key])
            except UtilitySyntaxError as exc:
                raise _where(key, str(exc)) from None
        M = get_number(doc, "M", "", required=False, default=None, positive=True, allow_null=True)
        n_samples = int(get_number(doc, "n_samples", "", required=False, default=4096, positive=True))
        tie_tol = get_number(doc, "tie_tol", "", required=False, default=1e-9)
        seed = int(get_number(doc, "seed", "", required=False, default=0))
        return cls(noise, eta_grid, alpha_grid, doc["u_ad"], doc["u_dc"], M, n_samples,
                   tie_tol, seed, doc)

    @classmethod
    def load(cls, source, overrides: list[str] | None = None) -> "SolveConfig":
        return cls.from_document(apply_overrides(load_document(source), overrides or []))
