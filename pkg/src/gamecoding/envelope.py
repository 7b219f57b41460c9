"""Upper concave envelope of ``h`` and the worst-case MSE frontier.

The envelope is built from a uniform sample of ``h`` on ``[0, 1]`` with a
monotone-chain upper hull.  Between two hull vertices that are neighbouring
samples the envelope is ``max(h(q), chord)``, so in regions where ``h`` is
concave the envelope coincides with ``h`` exactly, not with its piecewise
linear interpolant.  Between vertices that skip samples the envelope is the
chord, whose endpoints are exact values of ``h``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import honest_noise as hn
from .errors import ConfigurationError, DomainError

DEFAULT_SAMPLES = 4096
TOUCH_TOL = 1e-9
SMALL_ALPHA = 1e-6


@dataclass(frozen=True)
class Touch:
    q: float


@dataclass(frozen=True)
class Segment:
    q1: float
    q2: float


def upper_hull(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Indices of the upper convex hull of points sorted by ``x`` (monotone chain)."""
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull, dtype=int)


@dataclass(frozen=True, eq=False)
class PiecewiseLinearEnvelope:
    """Concave majorant of a function on ``[0, 1]`` built from samples.

    ``q`` and ``h_samples`` are the sample grid and the function values on
    it; ``values`` are the envelope values at the same points and
    ``vertex`` flags the samples where the hull touches the function.
    """

    q: np.ndarray
    h_samples: np.ndarray
    values: np.ndarray
    vertex: np.ndarray
    func: Callable[[np.ndarray], np.ndarray]
    slope_at_zero: float
    eta: float | None = None
    delta: float | None = None

    @classmethod
    def from_function(cls, func, q, slope_at_zero: float | None = None, **meta):
        q = np.asarray(q, dtype=float)
        if q.ndim != 1 or q.size < 2 or q[0] != 0.0 or q[-1] != 1.0 or np.any(np.diff(q) <= 0):
            raise ConfigurationError("sample grid must ascend strictly from 0 to 1")
        hv = np.asarray(func(q), dtype=float)
        idx = upper_hull(q, hv)
        values = np.interp(q, q[idx], hv[idx])
        vertex = np.zeros(q.size, dtype=bool)
        vertex[idx] = True
        values[idx] = hv[idx]
        ratio = (hv[1:] - hv[0]) / q[1:]
        slope = float(np.max(ratio))
        if slope_at_zero is not None:
            slope = max(slope, float(slope_at_zero))
        return cls(q, hv, values, vertex, func, slope, **meta)

    @property
    def knots(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.q, self.values)]

    @property
    def vertex_q(self) -> np.ndarray:
        return self.q[self.vertex]

    def _locate(self, q: np.ndarray):
        vi = np.flatnonzero(self.vertex)
        vq = self.q[vi]
        j = np.clip(np.searchsorted(vq, q, side="right") - 1, 0, vq.size - 2)
        left, right = vi[j], vi[j + 1]
        q1, q2 = self.q[left], self.q[right]
        v1, v2 = self.h_samples[left], self.h_samples[right]
        chord = v1 + (v2 - v1) * (q - q1) / (q2 - q1)
        return left, right, chord

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        if np.any((q < 0) | (q > 1)):
            raise DomainError("envelope is defined on [0, 1]")
        _, _, chord = self._locate(q)
        out = np.maximum(np.asarray(self.func(q), dtype=float), chord)
        return float(out) if out.ndim == 0 else out

    def tangent(self, alpha: float) -> Touch | Segment:
        """Where the envelope meets ``h`` around ``alpha``."""
        alpha = float(alpha)
        if not 0.0 < alpha <= 1.0:
            raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
        left, right, chord = self._locate(np.asarray(alpha))
        if float(self.func(np.asarray(alpha))) >= float(chord) - TOUCH_TOL:
            return Touch(alpha)
        return Segment(float(self.q[left]), float(self.q[right]))


def build_envelope(
    noise: hn.HonestNoise,
    eta: float,
    n_samples: int = DEFAULT_SAMPLES,
    exact_tangency: bool = True,
) -> PiecewiseLinearEnvelope:
    """Concave envelope of ``h`` for the given noise and threshold.

    With uniform noise and ``eta < 8/3`` the analytic tangency point
    ``(9 eta + 4) / 28`` is added to the sample grid unless
    ``exact_tangency`` is false.
    """
    eta = float(eta)
    if not eta >= 2.0:
        raise DomainError(f"eta must be >= 2, got {eta!r}")
    if n_samples < 16:
        raise ConfigurationError(f"n_samples must be >= 16, got {n_samples}")
    q = np.linspace(0.0, 1.0, int(n_samples))
    if exact_tangency and noise.is_uniform and eta < 8.0 / 3.0:
        q = np.union1d(q, [(9.0 * eta + 4.0) / 28.0])

    def func(x):
        return hn.h(noise, eta, x)

    return PiecewiseLinearEnvelope.from_function(
        func, q, slope_at_zero=hn.h_slope_at_zero(noise, eta), eta=eta, delta=noise.delta
    )


def tangent_interval(env: PiecewiseLinearEnvelope, alpha: float) -> Touch | Segment:
    return env.tangent(alpha)


def beta(env: PiecewiseLinearEnvelope, alpha):
    """Worst-case MSE of the mean estimator at acceptance probability ``alpha``.

    Below ``alpha = 1e-6`` the limit ``slope_at_zero / 4`` is returned.
    Accepts scalars or arrays.
    """
    a = np.asarray(alpha, dtype=float)
    if np.any(~(a > 0)) or np.any(a > 1):
        raise DomainError("alpha must lie in (0, 1]")
    small = a < SMALL_ALPHA
    safe = np.where(small, 1.0, a)
    out = np.where(small, env.slope_at_zero / 4.0, np.asarray(env(safe)) / (4.0 * safe))
    return float(out) if out.ndim == 0 else out


def gap_term(eta: float, delta: float, M: float | None) -> float:
    """Width of the interval that contains the exact MMSE frontier."""
    if M is None or np.isinf(M):
        return 0.0
    return (eta**2 + 4.0) * (eta + 2.0) * delta**3 / M


@dataclass(frozen=True)
class FrontierPoint:
    eta: float
    alpha: float
    beta: float
    c_lower: float
    c_upper: float
    gap: float


def check_prior_width(eta: float, delta: float, M: float | None) -> None:
    if M is not None and not np.isinf(M) and not M > (eta + 2.0) * delta:
        raise ConfigurationError(
            f"M={M!r} must exceed (eta+2)*delta={(eta + 2.0) * delta!r}"
        )


def c_bounds(env: PiecewiseLinearEnvelope, alpha: float, M: float | None = None) -> FrontierPoint:
    eta, delta = env.eta, env.delta
    check_prior_width(eta, delta, M)
    b = beta(env, alpha)
    gap = gap_term(eta, delta, M)
    return FrontierPoint(eta, float(alpha), b, max(0.0, b - gap), b, gap)


def frontier(env: PiecewiseLinearEnvelope, alphas, M: float | None = None):
    """Vectorised :func:`c_bounds`: returns ``(beta, c_lower, c_upper)`` arrays."""
    check_prior_width(env.eta, env.delta, M)
    b = np.atleast_1d(beta(env, alphas))
    gap = gap_term(env.eta, env.delta, M)
    return b, np.maximum(0.0, b - gap), b
