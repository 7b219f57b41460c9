"""Stackelberg equilibrium of the acceptance-threshold game.

The collector (leader) commits to ``eta``; the adversary (follower) picks
an acceptance probability ``alpha`` on the frontier ``c_eta(alpha)``
maximising its utility, breaking ties against the collector.  The solver
scans ``eta`` and ``alpha`` grids; :func:`brute_force_stackelberg` repeats
the computation from raw two-atom mixtures without using the envelope.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import adversary as adv
from . import envelope as env_mod
from . import honest_noise as hn
from .config import SolveConfig
from .errors import ConfigurationError, EvaluationError, MonotonicityError
from .utility import Expr, parse_utility

PROBE_MMSE = np.geomspace(0.05, 200.0, 20)
PROBE_PA = np.linspace(0.05, 1.0, 20)


def audit_monotonicity(q_ad: Expr, q_dc: Expr, tol: float = 1e-12) -> None:
    """Check the utilities' required monotonicity on a 20x20 probe grid.

    The adversary's utility must increase strictly in both arguments; the
    collector's must not increase in MMSE and not decrease in PA.
    """
    m, p = np.meshgrid(PROBE_MMSE, PROBE_PA, indexing="ij")
    ad = q_ad(m, p)
    dc = q_dc(m, p)
    if not np.all(np.isfinite(ad)):
        raise MonotonicityError(f"adversary utility {q_ad} is not finite on the probe grid")
    if not np.all(np.isfinite(dc)):
        raise MonotonicityError(f"collector utility {q_dc} is not finite on the probe grid")
    if not (np.all(np.diff(ad, axis=0) > 0) and np.all(np.diff(ad, axis=1) > 0)):
        raise MonotonicityError(f"adversary utility {q_ad} is not strictly increasing in MMSE and PA")
    scale = tol * max(1.0, float(np.max(np.abs(dc))))
    if np.any(np.diff(dc, axis=0) > scale):
        raise MonotonicityError(f"collector utility {q_dc} increases with MMSE")
    if np.any(np.diff(dc, axis=1) < -scale):
        raise MonotonicityError(f"collector utility {q_dc} decreases with PA")


@dataclass
class BestResponseSet:
    eta: float
    alphas: list[float]
    u_ad_max: float


def best_response_alphas(
    noise: hn.HonestNoise,
    eta: float,
    q_ad: Expr,
    alpha_grid,
    env: env_mod.PiecewiseLinearEnvelope | None = None,
    tie_tol: float = 1e-9,
) -> BestResponseSet:
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    if env is None:
        env = env_mod.build_envelope(noise, eta)
    c = np.atleast_1d(env_mod.beta(env, alpha_grid))
    return _best_response(eta, alpha_grid, c, q_ad, tie_tol)


def _best_response(eta, alphas, c, q_ad, tie_tol) -> BestResponseSet:
    u = np.asarray(q_ad(c, alphas), dtype=float)
    finite = np.isfinite(u)
    if not finite.any():
        raise EvaluationError(f"adversary utility is not finite anywhere on the grid (eta={eta})")
    top = float(np.max(u[finite]))
    members = finite & (u >= top - tie_tol)
    return BestResponseSet(float(eta), [float(a) for a in alphas[members]], top)


@dataclass
class EtaOutcome:
    eta: float
    best_response: BestResponseSet
    alpha: float  # DC-worst member
    mmse: float
    u_dc: float


@dataclass
class EquilibriumReport:
    eta_star: float
    alpha_star: float
    pa: float
    mmse: float
    u_dc: float
    u_ad: float
    noise: adv.DiscreteSymmetricNoise
    best_response: list[float]
    grid_meta: dict
    c_lower: float | None = None
    per_eta: list[EtaOutcome] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "eta_star": self.eta_star,
            "alpha_star": self.alpha_star,
            "pa": self.pa,
            "mmse": self.mmse,
            "c_lower": self.c_lower,
            "u_dc": self.u_dc,
            "u_ad": self.u_ad,
            "best_response": self.best_response,
            "noise": self.noise.to_json(),
            "grid_meta": self.grid_meta,
            "per_eta": [
                {"eta": o.eta, "alphas": o.best_response.alphas, "alpha": o.alpha,
                 "mmse": o.mmse, "u_ad": o.best_response.u_ad_max, "u_dc": o.u_dc}
                for o in self.per_eta
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _grid_meta(cfg: SolveConfig, **extra) -> dict:
    def describe(g):
        return {"min": float(g[0]), "max": float(g[-1]), "n": int(g.size)}

    meta = {
        "eta_grid": describe(cfg.eta_grid),
        "alpha_grid": describe(cfg.alpha_grid),
        "tie_tol": cfg.tie_tol,
        "n_samples": cfg.n_samples,
        "M": cfg.M,
        "delta": cfg.delta,
        "honest_noise": cfg.noise.kind.value,
    }
    meta.update(extra)
    return meta


def _parse_pair(cfg: SolveConfig) -> tuple[Expr, Expr]:
    q_ad = parse_utility(cfg.u_ad)
    q_dc = parse_utility(cfg.u_dc)
    audit_monotonicity(q_ad, q_dc)
    return q_ad, q_dc


def _check_grids(cfg: SolveConfig) -> None:
    if cfg.eta_grid.size == 0 or cfg.alpha_grid.size == 0:
        raise ConfigurationError("eta and alpha grids must be nonempty")
    if cfg.eta_grid[0] < 2.0:
        raise ConfigurationError("eta grid must lie in [2, inf)")
    if cfg.M is not None:
        env_mod.check_prior_width(float(cfg.eta_grid[-1]), cfg.delta, cfg.M)


def _pick_eta(outcomes: list[EtaOutcome], tie_tol: float) -> EtaOutcome:
    best = outcomes[0]
    for o in outcomes[1:]:
        if o.u_dc > best.u_dc + tie_tol:
            best = o
    return best


def _dc_worst(eta, br: BestResponseSet, alphas, c, q_dc) -> EtaOutcome:
    members = np.isin(alphas, br.alphas)
    u = np.asarray(q_dc(c[members], alphas[members]), dtype=float)
    u = np.where(np.isnan(u), -np.inf, u)
    i = int(np.argmin(u))
    return EtaOutcome(float(eta), br, float(alphas[members][i]), float(c[members][i]), float(u[i]))


def solve_stackelberg(cfg: SolveConfig, threads: int = 1) -> EquilibriumReport:
    """Grid solution of the leader's problem using the envelope frontier."""
    _check_grids(cfg)
    q_ad, q_dc = _parse_pair(cfg)
    alphas = cfg.alpha_grid

    def one(eta):
        env = env_mod.build_envelope(cfg.noise, eta, cfg.n_samples)
        c = np.atleast_1d(env_mod.beta(env, alphas))
        br = _best_response(eta, alphas, c, q_ad, cfg.tie_tol)
        return _dc_worst(eta, br, alphas, c, q_dc), env

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, cfg.eta_grid))
    else:
        results = [one(eta) for eta in cfg.eta_grid]
    outcomes = [r[0] for r in results]
    best = _pick_eta(outcomes, cfg.tie_tol)
    env = results[outcomes.index(best)][1]
    noise = adv.synthesize_optimal_noise(cfg.noise, best.eta, best.alpha, env)
    c_lower = None
    if cfg.M is not None:
        c_lower = env_mod.c_bounds(env, best.alpha, cfg.M).c_lower
    return EquilibriumReport(
        eta_star=best.eta,
        alpha_star=best.alpha,
        pa=best.alpha,
        mmse=best.mmse,
        u_dc=best.u_dc,
        u_ad=float(q_ad(best.mmse, best.alpha)),
        noise=noise,
        best_response=best.best_response.alphas,
        grid_meta=_grid_meta(cfg, method="envelope"),
        c_lower=c_lower,
        per_eta=outcomes,
    )


def _pair_noise(z: np.ndarray, i: int, j: int, lam: float, delta: float) -> adv.DiscreteSymmetricNoise:
    mass: dict[float, float] = {}
    for idx, p in ((i, lam), (j, 1.0 - lam)):
        if p > 0:
            key = float(z[idx] / delta)
            mass[key] = mass.get(key, 0.0) + p / 2.0
    return adv.DiscreteSymmetricNoise(tuple(sorted(mass.items())))


def _support_grid(noise: hn.HonestNoise, eta: float, n: int, alphas: np.ndarray) -> np.ndarray:
    """Uniform band grid, refined near its outer edge.

    A uniform grid cannot place an atom whose acceptance probability is
    below its first nonzero level, so the alpha grid points under that
    level get their own single-atom supports.  The result is sorted by
    decreasing acceptance probability.
    """
    d = noise.delta
    z = np.linspace((eta - 1.0) * d, (eta + 1.0) * d, n)
    first = float(hn.kernel_k(noise, eta, z[-2]))
    low = alphas[alphas < first]
    if low.size:
        z = np.union1d(z, np.atleast_1d(hn.kernel_k_inv(noise, eta, low)))
    return z


def brute_force_stackelberg(cfg: SolveConfig, support_grid_n: int = 2001) -> EquilibriumReport:
    """Leader optimum found by enumerating two-magnitude mixtures directly.

    For each ``eta`` the candidates are symmetric mixtures on at most two
    magnitudes from a uniform grid over the band whose acceptance
    probability is an ``alpha`` grid point.  Because the adversary's
    utility is strictly increasing in MMSE, only the largest-MSE candidate
    at each ``alpha`` can be in its argmax set.
    """
    _check_grids(cfg)
    if support_grid_n < 2:
        raise ConfigurationError("support_grid_n must be >= 2")
    q_ad, q_dc = _parse_pair(cfg)
    d = cfg.delta
    alphas = cfg.alpha_grid
    outcomes, chosen = [], []
    for eta in cfg.eta_grid:
        z = _support_grid(cfg.noise, eta, int(support_grid_n), alphas)
        k = np.asarray(hn.kernel_k(cfg.noise, eta, z))
        nu = np.asarray(hn.kernel_nu(cfg.noise, eta, z))
        num, pi, pj, plam = adv.pair_frontier(k, nu, alphas)
        feasible = np.isfinite(num)
        mse = np.where(feasible, num / (4.0 * alphas), np.nan)
        ua = np.where(feasible, q_ad(mse, alphas), np.nan)
        if not np.any(np.isfinite(ua)):
            raise EvaluationError(f"no finite adversary utility at eta={eta}")
        br = _best_response(eta, alphas[feasible], mse[feasible], q_ad, cfg.tie_tol)
        out = _dc_worst(eta, br, alphas[feasible], mse[feasible], q_dc)
        outcomes.append(out)
        pos = int(np.flatnonzero(alphas == out.alpha)[0])
        chosen.append((z, (num[pos], pi[pos], pj[pos], plam[pos])))
    best = _pick_eta(outcomes, cfg.tie_tol)
    z, (_, i, j, lam) = chosen[outcomes.index(best)]
    noise = _pair_noise(z, i, j, lam, d)
    ev = adv.evaluate(noise, cfg.noise, best.eta)
    return EquilibriumReport(
        eta_star=best.eta,
        alpha_star=best.alpha,
        pa=ev.pa,
        mmse=ev.mse_mean,
        u_dc=best.u_dc,
        u_ad=float(q_ad(ev.mse_mean, ev.pa)),
        noise=noise,
        best_response=best.best_response.alphas,
        grid_meta=_grid_meta(cfg, method="brute_force", support_grid_n=int(support_grid_n)),
        per_eta=outcomes,
    )
