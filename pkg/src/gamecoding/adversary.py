"""Adversary noise as point-mass mixtures.

Locations are stored in units of the honest noise half-width ``delta``.
A :class:`DiscreteSymmetricNoise` atom ``(z, w)`` places mass ``w`` at
``+z`` and mass ``w`` at ``-z`` (so an atom at ``z = 0`` carries ``2w``);
total mass is ``2 * sum(w) = 1``.  :class:`SignedMixture` is the
unrestricted form used as input to :func:`symmetrize` and by the
simulator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import envelope as env_mod
from . import honest_noise as hn
from .errors import ConfigurationError, DomainError, InfeasibleError, UndefinedConditionalError

MASS_TOL = 1e-12


@dataclass(frozen=True)
class DiscreteSymmetricNoise:
    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        atoms = tuple((float(z), float(w)) for z, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ConfigurationError("a noise distribution needs at least one atom")
        z = np.array([a[0] for a in atoms])
        w = np.array([a[1] for a in atoms])
        if not np.all(np.isfinite(z)) or not np.all(np.isfinite(w)):
            raise ConfigurationError("atoms must be finite")
        if z[0] < 0 or np.any(np.diff(z) <= 0):
            raise ConfigurationError("atom locations must be nonnegative and strictly ascending")
        if np.any(w <= 0):
            raise ConfigurationError("atom weights must be positive")
        if abs(2.0 * w.sum() - 1.0) > MASS_TOL:
            raise ConfigurationError(f"total mass 2*sum(w) = {2.0 * w.sum()!r}, expected 1")

    @property
    def z(self) -> np.ndarray:
        return np.array([a[0] for a in self.atoms])

    @property
    def w(self) -> np.ndarray:
        return np.array([a[1] for a in self.atoms])

    def to_signed(self) -> "SignedMixture":
        pts: list[tuple[float, float]] = []
        for z, w in self.atoms:
            if z == 0.0:
                pts.append((0.0, 2.0 * w))
            else:
                pts += [(-z, w), (z, w)]
        return SignedMixture(tuple(sorted(pts)))

    def to_json(self) -> dict:
        return {"delta_units": True, "atoms": [{"z": z, "w": w} for z, w in self.atoms]}

    @classmethod
    def from_json(cls, doc: dict | str, delta: float = 1.0) -> "DiscreteSymmetricNoise":
        if isinstance(doc, str):
            doc = json.loads(doc)
        try:
            atoms = [(float(a["z"]), float(a["w"])) for a in doc["atoms"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed noise document: {exc}") from None
        if not doc.get("delta_units", True):
            atoms = [(z / delta, w) for z, w in atoms]
        return cls(tuple(atoms))


@dataclass(frozen=True)
class SignedMixture:
    """Arbitrary point masses ``(location, probability)``; locations in delta units."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(z), float(p)) for z, p in self.points)
        object.__setattr__(self, "points", pts)
        p = np.array([x[1] for x in pts])
        if not pts or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ConfigurationError("signed mixture needs positive masses summing to 1")

    @property
    def z(self) -> np.ndarray:
        return np.array([x[0] for x in self.points])

    @property
    def p(self) -> np.ndarray:
        return np.array([x[1] for x in self.points])

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        try:
            sym = symmetrize(self)
        except ConfigurationError:
            return False
        other = sym.to_signed()
        if len(other.points) != len(self.points):
            return False
        a = np.array(sorted(self.points))
        b = np.array(sorted(other.points))
        return bool(np.allclose(a, b, rtol=0, atol=tol))


@dataclass(frozen=True)
class NoiseEvaluation:
    pa: float
    mse_mean: float

    @property
    def degenerate(self) -> bool:
        return self.pa == 0.0


def _band_split(noise: hn.HonestNoise, eta: float, z_abs: np.ndarray):
    lo, hi = (eta - 1.0) * noise.delta, (eta + 1.0) * noise.delta
    inner = z_abs < lo
    band = (z_abs >= lo) & (z_abs <= hi)
    return inner, band


def _closed_form_sums(g: DiscreteSymmetricNoise, noise: hn.HonestNoise, eta: float):
    if not eta >= 2.0:
        raise DomainError(f"eta must be >= 2, got {eta!r}")
    z = g.z * noise.delta
    w = g.w
    inner, band = _band_split(noise, eta, z)
    pa = 2.0 * w[inner].sum()
    num = 2.0 * np.sum((z[inner] ** 2 + noise.variance) * w[inner])
    if band.any():
        zb = z[band]
        pa += 2.0 * np.sum(np.atleast_1d(hn.kernel_k(noise, eta, zb)) * w[band])
        num += 2.0 * np.sum(np.atleast_1d(hn.kernel_nu(noise, eta, zb)) * w[band])
    return float(pa), float(num)


def acceptance_probability(g: DiscreteSymmetricNoise, noise: hn.HonestNoise, eta: float) -> float:
    return _closed_form_sums(g, noise, eta)[0]


def mse_mean(g: DiscreteSymmetricNoise, noise: hn.HonestNoise, eta: float) -> float:
    """MSE of ``(y1 + y2) / 2`` conditioned on acceptance."""
    pa, num = _closed_form_sums(g, noise, eta)
    if pa <= 0.0:
        raise UndefinedConditionalError("acceptance probability is zero; conditional MSE is undefined")
    return num / (4.0 * pa)


def evaluate(g: DiscreteSymmetricNoise, noise: hn.HonestNoise, eta: float) -> NoiseEvaluation:
    pa, num = _closed_form_sums(g, noise, eta)
    return NoiseEvaluation(pa, num / (4.0 * pa) if pa > 0 else float("nan"))


def evaluate_signed(mix: SignedMixture, noise: hn.HonestNoise, eta: float) -> NoiseEvaluation:
    """Reference evaluator for any mixture, integrating over the honest noise per atom.

    For an atom at ``z`` the collector accepts iff ``|n_h - z| <= eta*delta``;
    the accepted squared error of the mean is ``(n_h + z)^2 / 4``.
    """
    d = noise.delta
    z = mix.z * d
    a = np.maximum(-d, z - eta * d)
    b = np.minimum(d, z + eta * d)
    m0 = noise.partial_moment(a, b, 0)
    m1 = noise.partial_moment(a, b, 1)
    m2 = noise.partial_moment(a, b, 2)
    pa = float(np.sum(mix.p * m0))
    num = float(np.sum(mix.p * (m2 + 2.0 * z * m1 + z * z * m0)))
    return NoiseEvaluation(pa, num / (4.0 * pa) if pa > 0 else float("nan"))


def symmetrize(g_raw: SignedMixture | Iterable[tuple[float, float]]) -> DiscreteSymmetricNoise:
    """Average a mixture with its reflection: ``g_sym(z) = (g(z) + g(-z)) / 2``."""
    if not isinstance(g_raw, SignedMixture):
        g_raw = SignedMixture(tuple(g_raw))
    mass: dict[float, float] = {}
    for z, p in g_raw.points:
        key = abs(z)
        mass[key] = mass.get(key, 0.0) + p
    total = sum(mass.values())
    atoms = tuple((z, mass[z] / (2.0 * total)) for z in sorted(mass))
    return DiscreteSymmetricNoise(atoms)


def synthesize_optimal_noise(
    noise: hn.HonestNoise,
    eta: float,
    alpha: float,
    env: env_mod.PiecewiseLinearEnvelope | None = None,
) -> DiscreteSymmetricNoise:
    """Noise with acceptance probability ``alpha`` attaining the frontier ``beta(alpha)``."""
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    if env is None:
        env = env_mod.build_envelope(noise, eta)
    d = noise.delta
    where = env.tangent(alpha)
    if isinstance(where, env_mod.Touch):
        g = DiscreteSymmetricNoise(((hn.kernel_k_inv(noise, eta, alpha) / d, 0.5),))
    else:
        q1, q2 = where.q1, where.q2
        b1 = (q2 - alpha) / (2.0 * (q2 - q1))
        b2 = (alpha - q1) / (2.0 * (q2 - q1))
        z1 = hn.kernel_k_inv(noise, eta, q1) / d
        z2 = hn.kernel_k_inv(noise, eta, q2) / d
        g = DiscreteSymmetricNoise(((z2, b2), (z1, b1)))

    ev = evaluate(g, noise, eta)
    target = env_mod.beta(env, alpha)
    if abs(ev.pa - alpha) > 1e-9 or abs(ev.mse_mean - target) > 1e-9 * max(1.0, target):
        raise RuntimeError(
            f"synthesized noise misses its target: PA={ev.pa!r} vs {alpha!r}, "
            f"MSE={ev.mse_mean!r} vs {target!r}"
        )
    return g


def pair_frontier(k: np.ndarray, nu: np.ndarray, alphas):
    """Best two-atom numerator at each acceptance level in ``alphas``.

    Exhaustive over pairs ``(i, j)`` with ``k_i >= alpha >= k_j``: the
    mixture puts mass ``lam/2`` at ``+-z_i`` and ``(1-lam)/2`` at ``+-z_j``,
    ``lam = (alpha - k_j) / (k_i - k_j)``, and its numerator is
    ``lam nu_i + (1 - lam) nu_j``.  For fixed ``i`` that is
    ``nu_i - (k_i - alpha) s_ij`` with ``s_ij`` the chord slope, so the
    best ``j`` is the smallest slope among atoms with ``k_j <= alpha``: a
    prefix minimum over ``j`` sorted by ``k``.  Cost is ``O(n^2 + n m)``.

    Returns arrays ``(value, i, j, lam)``; infeasible levels get
    ``value = -inf`` and ``i = j = -1``.
    """
    k = np.asarray(k, dtype=float)
    nu = np.asarray(nu, dtype=float)
    a = np.atleast_1d(np.asarray(alphas, dtype=float))
    order = np.argsort(k, kind="stable")
    ks, ns = k[order], nu[order]
    n = ks.size
    dk = k[:, None] - ks[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(dk > 0, (nu[:, None] - ns[None, :]) / dk, np.inf)
    run = np.minimum.accumulate(slope, axis=1)
    cols = np.broadcast_to(np.arange(n), slope.shape)
    arg = np.maximum.accumulate(np.where(slope == run, cols, 0), axis=1)

    t = np.searchsorted(ks, a, side="right") - 1  # last j with k_j <= alpha
    feasible = t >= 0
    tt = np.where(feasible, t, 0)
    s_best = run[:, tt]  # (n, m)
    with np.errstate(invalid="ignore"):
        val = nu[:, None] - (k[:, None] - a[None, :]) * s_best
    exact = np.abs(k[:, None] - a[None, :]) <= 1e-12
    val = np.where(exact, nu[:, None], val)
    val = np.where((k[:, None] >= a[None, :]) | exact, val, -np.inf)
    val = np.where(np.isfinite(val) & feasible[None, :], val, -np.inf)

    bi = np.argmax(val, axis=0)
    cols_m = np.arange(a.size)
    best = val[bi, cols_m]
    bj = order[arg[bi, tt]]
    single = exact[bi, cols_m]
    bj = np.where(single, bi, bj)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(single, 1.0, (a - k[bj]) / (k[bi] - k[bj]))
    ok = np.isfinite(best)
    return (
        best,
        np.where(ok, bi, -1),
        np.where(ok, bj, -1),
        np.where(ok, lam, 0.0),
    )


def best_pair(k: np.ndarray, nu: np.ndarray, alpha: float):
    """:func:`pair_frontier` at a single level: ``(value, i, j, lam)``."""
    v, i, j, lam = pair_frontier(k, nu, [alpha])
    return float(v[0]), int(i[0]), int(j[0]), float(lam[0])


def brute_force_beta(noise: hn.HonestNoise, eta: float, alpha: float, grid_n: int = 2001) -> float:
    """Largest mean-estimator MSE over two-magnitude symmetric mixtures on a grid.

    Supports are restricted to a uniform grid of ``grid_n`` points on the band
    and the acceptance probability is held at exactly ``alpha``.
    """
    if grid_n < 32:
        raise ConfigurationError(f"grid_n must be >= 32, got {grid_n}")
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha!r}")
    d = noise.delta
    z = np.linspace((eta - 1.0) * d, (eta + 1.0) * d, int(grid_n))
    k = np.asarray(hn.kernel_k(noise, eta, z))
    nu = np.asarray(hn.kernel_nu(noise, eta, z))
    best = best_pair(k, nu, alpha)[0]
    if not np.isfinite(best):
        raise InfeasibleError(f"no feasible pair on the grid for alpha={alpha!r}")
    # 2 * (w1 nu_1 + w2 nu_2) / (4 alpha) with 2 w1 + 2 w2 = 1 folded into the chord.
    return best / (4.0 * alpha)
