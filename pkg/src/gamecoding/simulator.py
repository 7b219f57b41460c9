"""Seeded Monte Carlo simulation of the two-node protocol.

Each round draws ``u ~ U[-M, M]``, an honest noise ``n_h`` and an adversary
noise ``n_a``; the honest report lands at position 1 or 2 with equal
probability.  The collector accepts iff ``|y1 - y2| <= eta * delta`` and
estimates ``u`` by ``(y1 + y2) / 2``.

Rounds are processed in fixed-size blocks.  Block ``b`` draws from its own
generator seeded by ``SeedSequence(master_seed, spawn_key=(b,))`` and block
accumulators are merged in block order, so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import adversary as adv
from . import envelope as env_mod
from .errors import ConfigurationError, InsufficientDataError
from .honest_noise import HonestNoise

BLOCK = 1 << 16
DUMP_LIMIT = 100_000
TEST_FUNCTIONS = ("one", "diff", "sum_over_M", "sign_diff")
MIN_INTERIOR = 1000
MIN_BIN_MEDIAN = 50


@dataclass(frozen=True)
class SimConfig:
    M: float
    eta: float
    honest_noise: HonestNoise
    adversary: adv.DiscreteSymmetricNoise | adv.SignedMixture
    n_samples: int
    master_seed: int = 0
    delta: float | None = None

    def __post_init__(self):
        d = self.honest_noise.delta
        if self.delta is None:
            object.__setattr__(self, "delta", d)
        elif abs(self.delta - d) > 1e-12 * d:
            raise ConfigurationError(f"delta={self.delta!r} disagrees with the honest noise ({d!r})")
        if not self.eta >= 2.0:
            raise ConfigurationError(f"eta must be >= 2, got {self.eta!r}")
        if not (isinstance(self.M, (int, float)) and math.isfinite(self.M)):
            raise ConfigurationError("M must be a finite number")
        env_mod.check_prior_width(self.eta, d, self.M)
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ConfigurationError(f"n_samples must be a positive integer, got {self.n_samples!r}")
        object.__setattr__(self, "n_samples", int(self.n_samples))
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigurationError("master_seed must be a 64-bit unsigned integer")

    @property
    def mixture(self) -> adv.SignedMixture:
        a = self.adversary
        return a.to_signed() if isinstance(a, adv.DiscreteSymmetricNoise) else a


@dataclass
class EmpiricalStats:
    n_samples: int
    n_accepted: int
    pa_hat: float
    pa_stderr: float
    mse_mean_hat: float | None
    mse_stderr: float | None
    interior_fraction: float | None
    orthogonality_residuals: list[tuple[str, float, float]] = field(default_factory=list)

    @property
    def mse_available(self) -> bool:
        return self.n_accepted > 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["orthogonality_residuals"] = [
            {"id": i, "residual": r, "stderr": s} for i, r, s in self.orthogonality_residuals
        ]
        d["mse_available"] = self.mse_available
        return d


# ----------------------------------------------------------------------
# round generation
# ----------------------------------------------------------------------
def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(block,)))


def _draw(cfg: SimConfig, rng: np.random.Generator, n: int, u: np.ndarray | None = None):
    mix = cfg.mixture
    if u is None:
        u = rng.uniform(-cfg.M, cfg.M, n)
    n_h = cfg.honest_noise.sample(rng, n)
    n_a = mix.z[rng.choice(mix.z.size, size=n, p=mix.p / mix.p.sum())] * cfg.delta
    first = rng.random(n) < 0.5
    y1 = u + np.where(first, n_h, n_a)
    y2 = u + np.where(first, n_a, n_h)
    accepted = np.abs(y1 - y2) <= cfg.eta * cfg.delta
    return u, y1, y2, accepted


def _blocks(n: int):
    starts = range(0, n, BLOCK)
    return [(b, min(BLOCK, n - s)) for b, s in enumerate(starts)]


def _run_blocks(cfg: SimConfig, fn, threads: int):
    jobs = _blocks(cfg.n_samples)

    def one(job):
        b, size = job
        return fn(_block_rng(cfg.master_seed, b), size)

    threads = resolve_threads(threads)
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, jobs))
    return [one(j) for j in jobs]


def resolve_threads(threads: int | None) -> int:
    """``0`` or ``None`` means one thread per CPU."""
    if threads is None or threads == 0:
        return os.cpu_count() or 1
    if threads < 0:
        raise ConfigurationError(f"threads must be >= 0, got {threads}")
    return int(threads)


# ----------------------------------------------------------------------
# simulate
# ----------------------------------------------------------------------
def _phi(s, d, M):
    return np.stack([np.ones_like(s), d, s / M, np.sign(d)])


def simulate(cfg: SimConfig, threads: int = 1) -> EmpiricalStats:
    """Estimate PA, the mean-estimator MSE and the orthogonality residuals."""
    interior_limit = 2.0 * cfg.M - (cfg.eta + 2.0) * cfg.delta

    def block(rng, n):
        u, y1, y2, acc = _draw(cfg, rng, n)
        s, d = (y1 + y2)[acc], (y1 - y2)[acc]
        r = u[acc] - s / 2.0
        e2 = r * r
        inner = np.abs(s) <= interior_limit
        x = _phi(s[inner], d[inner], cfg.M) * r[inner]
        return np.array([
            n, acc.sum(), e2.sum(), (e2 * e2).sum(), inner.sum(),
            *x.sum(axis=1), *(x * x).sum(axis=1),
        ])

    tot = np.sum(_run_blocks(cfg, block, threads), axis=0)
    n, n_acc, s1, s2, n_in = tot[:5]
    n_acc, n_in = int(n_acc), int(n_in)
    pa = n_acc / n
    pa_se = math.sqrt(pa * (1.0 - pa) / n)
    if n_acc == 0:
        return EmpiricalStats(int(n), 0, 0.0, pa_se, None, None, None, [])
    mse = s1 / n_acc
    var = max(s2 / n_acc - mse * mse, 0.0)
    resid = []
    if n_in > 1:
        k = len(TEST_FUNCTIONS)
        sums, sq = tot[5:5 + k], tot[5 + k:5 + 2 * k]
        for name, a, b in zip(TEST_FUNCTIONS, sums, sq):
            m = a / n_in
            v = max(b / n_in - m * m, 0.0)
            resid.append((name, float(m), math.sqrt(v / (n_in - 1))))
    return EmpiricalStats(
        n_samples=int(n),
        n_accepted=n_acc,
        pa_hat=pa,
        pa_stderr=pa_se,
        mse_mean_hat=float(mse),
        mse_stderr=math.sqrt(var / n_acc),
        interior_fraction=n_in / n_acc,
        orthogonality_residuals=resid,
    )


def orthogonality_check(cfg: SimConfig, threads: int = 1, n_sigma: float = 4.0):
    """Residuals of ``u - (y1+y2)/2`` against the test functions on interior rounds.

    Returns ``(id, residual, stderr, ok)`` tuples.
    """
    if not cfg.mixture.is_symmetric():
        raise ConfigurationError("orthogonality check requires a symmetric adversary mixture")
    stats = simulate(cfg, threads)
    n_in = 0 if stats.interior_fraction is None else round(stats.interior_fraction * stats.n_accepted)
    if n_in < MIN_INTERIOR:
        raise InsufficientDataError(f"only {n_in} interior accepted rounds (need {MIN_INTERIOR})")
    return [(i, r, s, abs(r) <= n_sigma * s) for i, r, s in stats.orthogonality_residuals]


def dump_rounds(cfg: SimConfig) -> np.ndarray:
    """Per-round ``(u, y1, y2, accepted)`` rows; only for ``n_samples <= 100000``."""
    if cfg.n_samples > DUMP_LIMIT:
        raise ConfigurationError(f"round dump is limited to {DUMP_LIMIT} rounds")
    parts = _run_blocks(cfg, lambda rng, n: np.column_stack(_draw(cfg, rng, n)), 1)
    return np.vstack(parts)


# ----------------------------------------------------------------------
# conditional-mean gap
# ----------------------------------------------------------------------
@dataclass
class GapResult:
    gap: float
    stderr: float
    bound: float
    allowance: float
    median_bin_count: float

    @property
    def limit(self) -> float:
        return self.bound + 4.0 * self.stderr + self.allowance

    @property
    def ok(self) -> bool:
        return self.gap <= self.limit


def mmse_gap_check(cfg: SimConfig, bins: int = 64, threads: int = 1) -> GapResult:
    """MSE of the mean minus MSE of a binned conditional-mean estimator.

    Away from the prior's edges the mean is already the conditional mean,
    so the estimator only differs from it where ``|y1 + y2|`` is within a
    few noise widths of ``2M``.  Rounds are folded onto that edge
    (``b = 2M - |s|``, residual signed by ``s``), half of ``u`` is drawn
    from the edge layer with importance weights, and the bin means are
    cross-fitted over two folds so that bin noise cannot inflate the gap.
    Raises :class:`AssertionError` if the bound is violated.
    """
    if bins < 2:
        raise ConfigurationError("bins must be >= 2")
    ev = adv.evaluate_signed(cfg.mixture, cfg.honest_noise, cfg.eta)
    if not ev.pa > 0.05:
        raise ConfigurationError(f"gap check needs PA > 0.05, got {ev.pa:.4g}")
    if cfg.n_samples < 1_000_000:
        raise ConfigurationError("gap check needs n_samples >= 1e6")
    d_ = cfg.delta
    M = cfg.M
    edge = (cfg.eta + 2.0) * d_
    layer = min(2.0 * edge, M)

    def block(rng, n):
        from_layer = rng.random(n) < 0.5
        mag = np.where(from_layer, M - layer * rng.random(n), M * rng.random(n))
        u = np.where(rng.random(n) < 0.5, -mag, mag)
        in_layer = np.abs(u) >= M - layer
        q = 0.5 / (2.0 * M) + 0.5 * in_layer / (2.0 * layer)
        w = (1.0 / (2.0 * M)) / q
        u, y1, y2, acc = _draw(cfg, rng, n, u)
        s, dd = (y1 + y2)[acc], (y1 - y2)[acc]
        rho = (u[acc] - s / 2.0) * np.where(s >= 0, 1.0, -1.0)
        fold = rng.random(acc.sum()) < 0.5
        return np.column_stack([2.0 * M - np.abs(s), dd, rho, w[acc], fold])

    data = np.vstack(_run_blocks(cfg, block, threads))
    b, dd, rho, w, fold = data.T
    fold = fold.astype(bool)

    lo_b, hi_b = -edge, 2.0 * edge
    wb = (hi_b - lo_b) / bins
    wd = 2.0 * cfg.eta * d_ / bins
    ib = np.floor((b - lo_b) / wb).astype(np.int64)
    idd = np.clip(np.floor((dd + cfg.eta * d_) / wd).astype(np.int64), 0, bins - 1)
    cell = np.where(ib >= bins, bins * bins, np.clip(ib, 0, bins - 1) * bins + idd)
    ncell = bins * bins + 1

    pred = np.zeros_like(rho)
    for k in (False, True):
        train, test = fold == k, fold != k
        sw = np.bincount(cell[train], weights=w[train], minlength=ncell)
        sr = np.bincount(cell[train], weights=(w * rho)[train], minlength=ncell)
        with np.errstate(invalid="ignore", divide="ignore"):
            means = np.where(sw > 0, sr / sw, 0.0)
        pred[test] = means[cell[test]]

    g = rho * rho - (rho - pred) ** 2
    W = w.sum()
    gap = float(np.sum(w * g) / W)
    stderr = float(np.sqrt(np.sum((w * (g - gap)) ** 2)) / W)
    counts = np.bincount(cell[cell < bins * bins], minlength=bins * bins)
    occupied = counts[counts > 0]
    median = float(np.median(occupied)) if occupied.size else 0.0
    if median < MIN_BIN_MEDIAN:
        raise InsufficientDataError(
            f"median of {median:.0f} samples per occupied bin (need {MIN_BIN_MEDIAN}); use fewer bins"
        )
    result = GapResult(
        gap=gap,
        stderr=stderr,
        bound=env_mod.gap_term(cfg.eta, d_, M),
        allowance=max(wb, wd) ** 2 / 4.0,
        median_bin_count=median,
    )
    assert result.ok, (
        f"gap {gap:.4g} exceeds bound {result.bound:.4g} + 4*{stderr:.3g} + {result.allowance:.3g}"
    )
    return result
