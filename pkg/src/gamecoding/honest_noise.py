"""Honest-node noise model and the band kernels built on it.

The honest noise is symmetric on ``[-delta, delta]``.  Two families are
supported: the uniform density (closed forms everywhere) and a tabulated
density given by knots on ``[0, delta]`` that are mirrored about zero and
linearly interpolated.  For the tabulated family every integral of
``x**k * f(x)`` is a piecewise polynomial, so CDF, partial moments and the
inverse CDF are evaluated exactly rather than by quadrature.

For an acceptance threshold ``eta`` (the collector accepts iff
``|y1 - y2| <= eta * delta``) and an adversary offset ``z`` in the band
``[(eta - 1) delta, (eta + 1) delta]``::

    k(z)  = P(n_h >= z - eta*delta)               acceptance probability
    nu(z) = E[(n_h + z)^2 ; n_h >= z - eta*delta] accepted squared error
    h(q)  = nu(k^{-1}(q))
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError

_BAND_SLACK = 1e-12
_MASS_TOL = 1e-9


class NoiseKind(str, enum.Enum):
    UNIFORM = "uniform"
    TABULATED = "tabulated"


@dataclass(frozen=True, eq=False)
class HonestNoise:
    """Symmetric bounded density of the honest node's noise.

    Use :meth:`uniform` or :meth:`tabulated` to construct instances; both
    validate the density and precompute the variance.
    """

    kind: NoiseKind
    delta: float
    variance: float
    # Full mirrored knot grid on [-delta, delta] (tabulated only).
    _x: np.ndarray | None = field(default=None, repr=False)
    _f: np.ndarray | None = field(default=None, repr=False)
    # Cumulative moments of order 0, 1, 2 at each knot, shape (3, n_knots).
    _cum: np.ndarray | None = field(default=None, repr=False)

    # ------------------------------------------------------------------
    # construction
    # ------------------------------------------------------------------
    @classmethod
    def uniform(cls, delta: float = 1.0) -> "HonestNoise":
        delta = float(delta)
        if not (delta > 0 and np.isfinite(delta)):
            raise ConfigurationError(f"delta must be positive and finite, got {delta!r}")
        return cls(NoiseKind.UNIFORM, delta, delta * delta / 3.0)

    @classmethod
    def tabulated(cls, x, density, normalize: bool = False) -> "HonestNoise":
        """Density from knots ``(x_i, f_i)`` on ``[0, delta]``, mirrored about 0.

        ``x`` must start at 0 and be strictly ascending; ``delta`` is its last
        element.  The mirrored density must integrate to one within 1e-9
        unless ``normalize`` is set.  Densities that vanish on a whole
        interval are rejected because the CDF must be strictly increasing.
        """
        x = np.asarray(x, dtype=float)
        f = np.asarray(density, dtype=float)
        if x.ndim != 1 or x.shape != f.shape or x.size < 2:
            raise ConfigurationError("need at least two (x, density) knots of matching length")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(f)):
            raise ConfigurationError("knots must be finite")
        if x[0] != 0.0:
            raise ConfigurationError(f"first knot must be at x=0, got {x[0]!r}")
        if np.any(np.diff(x) <= 0):
            raise ConfigurationError("knot locations must be strictly ascending")
        if np.any(f < 0):
            raise ConfigurationError("density must be nonnegative")
        zero = f == 0.0
        if np.any(zero[:-1] & zero[1:]):
            i = int(np.flatnonzero(zero[:-1] & zero[1:])[0])
            raise ConfigurationError(
                f"density vanishes on [{x[i]!r}, {x[i + 1]!r}]; the CDF must be strictly increasing"
            )
        half_mass = float(np.sum(np.diff(x) * (f[:-1] + f[1:]) / 2.0))
        if normalize:
            f = f / (2.0 * half_mass)
        elif abs(2.0 * half_mass - 1.0) > _MASS_TOL:
            raise ConfigurationError(f"density integrates to {2.0 * half_mass!r}, expected 1")

        xf = np.concatenate([-x[:0:-1], x])
        ff = np.concatenate([f[:0:-1], f])
        cum = _cumulative_moments(xf, ff)
        delta = float(x[-1])
        variance = float(cum[2, -1])
        return cls(NoiseKind.TABULATED, delta, variance, xf, ff, cum)

    @classmethod
    def from_csv(cls, path: str | Path, normalize: bool = False) -> "HonestNoise":
        """Load a two-column ``x,density`` table (a header row is allowed)."""
        rows = []
        with open(path, newline="") as fh:
            for lineno, rec in enumerate(csv.reader(fh), start=1):
                if not rec or all(not c.strip() for c in rec):
                    continue
                if len(rec) != 2:
                    raise ConfigurationError(f"{path}:{lineno}: expected 2 columns, got {len(rec)}")
                try:
                    rows.append((float(rec[0]), float(rec[1])))
                except ValueError:
                    if rows or lineno > 1:
                        raise ConfigurationError(f"{path}:{lineno}: non-numeric entry {rec!r}") from None
        if not rows:
            raise ConfigurationError(f"{path}: no density knots found")
        arr = np.array(rows)
        return cls.tabulated(arr[:, 0], arr[:, 1], normalize=normalize)

    # ------------------------------------------------------------------
    # distribution functions
    # ------------------------------------------------------------------
    @property
    def is_uniform(self) -> bool:
        return self.kind is NoiseKind.UNIFORM

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_uniform:
            return np.where(np.abs(x) <= self.delta, 0.5 / self.delta, 0.0)
        return np.interp(x, self._x, self._f, left=0.0, right=0.0)

    def cdf(self, x):
        return self.moment_to(x, 0)

    def moment_to(self, x, order: int):
        """``int_{-delta}^{x} t**order f(t) dt`` for ``order`` in 0, 1, 2."""
        x = np.clip(np.asarray(x, dtype=float), -self.delta, self.delta)
        if self.is_uniform:
            d = self.delta
            p = order + 1
            return (x**p - (-d) ** p) / (p * 2.0 * d)
        xs, fs = self._x, self._f
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
        x0 = xs[i]
        slope = (fs[i + 1] - fs[i]) / (xs[i + 1] - x0)
        c0 = fs[i] - slope * x0
        p = order + 1
        return self._cum[order, i] + (
            c0 * (x**p - x0**p) / p + slope * (x ** (p + 1) - x0 ** (p + 1)) / (p + 1)
        )

    def partial_moment(self, a, b, order: int):
        """``int_a^b t**order f(t) dt`` (zero when ``b <= a``)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        out = self.moment_to(b, order) - self.moment_to(a, order)
        return np.where(b > a, out, 0.0)

    def ppf(self, p):
        """Inverse CDF on ``[0, 1]``."""
        p = np.asarray(p, dtype=float)
        if np.any((p < 0) | (p > 1)):
            raise DomainError("probabilities must lie in [0, 1]")
        if self.is_uniform:
            return self.delta * (2.0 * p - 1.0)
        xs, fs, cdf = self._x, self._f, self._cum[0]
        i = np.clip(np.searchsorted(cdf, p, side="right") - 1, 0, xs.size - 2)
        r = p - cdf[i]
        slope = (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i])
        # Solve slope/2 tau^2 + f_i tau - r = 0 in the cancellation-free form.
        disc = np.sqrt(np.maximum(fs[i] ** 2 + 2.0 * slope * r, 0.0))
        denom = fs[i] + disc
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(denom > 0, 2.0 * r / denom, 0.0)
        return np.clip(xs[i] + tau, xs[i], xs[i + 1])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.is_uniform:
            return rng.uniform(-self.delta, self.delta, size)
        return self.ppf(rng.random(size))

    def knots(self) -> list[tuple[float, float]]:
        """Half-line knots ``(x, density)`` on ``[0, delta]``."""
        if self.is_uniform:
            return [(0.0, 0.5 / self.delta), (self.delta, 0.5 / self.delta)]
        n = (self._x.size - 1) // 2
        return [(float(a), float(b)) for a, b in zip(self._x[n:], self._f[n:])]

    def to_dict(self) -> dict:
        if self.is_uniform:
            return {"kind": "uniform", "delta": self.delta}
        return {"kind": "tabulated", "table": [list(k) for k in self.knots()]}


def _cumulative_moments(xs: np.ndarray, fs: np.ndarray) -> np.ndarray:
    cum = np.zeros((3, xs.size))
    x0, x1 = xs[:-1], xs[1:]
    slope = (fs[1:] - fs[:-1]) / (x1 - x0)
    c0 = fs[:-1] - slope * x0
    for k in range(3):
        p = k + 1
        seg = c0 * (x1**p - x0**p) / p + slope * (x1 ** (p + 1) - x0 ** (p + 1)) / (p + 1)
        cum[k, 1:] = np.cumsum(seg)
    return cum


# ----------------------------------------------------------------------
# band kernels
# ----------------------------------------------------------------------
def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not eta >= 2.0:
        raise DomainError(f"eta must be >= 2, got {eta!r}")
    return eta


def _check_band(noise: HonestNoise, eta: float, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    lo, hi = (eta - 1.0) * noise.delta, (eta + 1.0) * noise.delta
    slack = _BAND_SLACK * hi
    if np.any((z < lo - slack) | (z > hi + slack)) or np.any(np.isnan(z)):
        raise DomainError(f"z must lie in the band [{lo!r}, {hi!r}]")
    return np.clip(z, lo, hi)


def _check_q(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q > 1)) or np.any(np.isnan(q)):
        raise DomainError("q must lie in [0, 1]")
    return q


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def kernel_k(noise: HonestNoise, eta: float, z):
    """Acceptance probability of an adversary offset ``z`` in the band."""
    eta = _check_eta(eta)
    z = _check_band(noise, eta, z)
    d = noise.delta
    if noise.is_uniform:
        return _scalar(((eta + 1.0) * d - z) / (2.0 * d))
    return _scalar(1.0 - noise.cdf(z - eta * d))


def kernel_k_inv(noise: HonestNoise, eta: float, q):
    """Band offset whose acceptance probability is ``q``; decreasing in ``q``."""
    eta = _check_eta(eta)
    q = _check_q(q)
    d = noise.delta
    if noise.is_uniform:
        return _scalar(d * (eta + 1.0 - 2.0 * q))
    return _scalar(eta * d + noise.ppf(1.0 - q))


def kernel_nu(noise: HonestNoise, eta: float, z):
    """Accepted second moment ``E[(n_h + z)^2 ; accepted]`` for offset ``z``."""
    eta = _check_eta(eta)
    z = _check_band(noise, eta, z)
    d = noise.delta
    if noise.is_uniform:
        return _scalar(((d + z) ** 3 - (2.0 * z - eta * d) ** 3) / (6.0 * d))
    a = z - eta * d
    m0 = noise.partial_moment(a, d, 0)
    m1 = noise.partial_moment(a, d, 1)
    m2 = noise.partial_moment(a, d, 2)
    return _scalar(np.maximum(m2 + 2.0 * z * m1 + z * z * m0, 0.0))


def h(noise: HonestNoise, eta: float, q):
    """``nu(k^{-1}(q))`` on ``[0, 1]``; ``h(0) = 0``."""
    eta = _check_eta(eta)
    q = _check_q(q)
    if noise.is_uniform:
        s = eta + 2.0
        return _scalar(noise.delta**2 * ((s - 2.0 * q) ** 3 - (s - 4.0 * q) ** 3) / 6.0)
    return kernel_nu(noise, eta, kernel_k_inv(noise, eta, q))


def h_slope_at_zero(noise: HonestNoise, eta: float) -> float:
    """Right derivative of ``h`` at 0, ``((eta + 2) delta)^2`` for any admissible density."""
    return ((_check_eta(eta) + 2.0) * noise.delta) ** 2
