"""Command-line front end.

Exit status: 0 success, 1 invalid input, 2 computation error, 3 a
``verify`` check failed.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import adversary as adv
from . import envelope as env_mod
from . import simulator as sim
from .config import SolveConfig, apply_overrides, get_number, load_document
from .equilibrium import brute_force_stackelberg, solve_stackelberg
from .errors import ConfigurationError, DomainError, GameOfCodingError, MonotonicityError
from .utility import UtilitySyntaxError, parse_utility

EXIT_OK, EXIT_INVALID, EXIT_COMPUTE, EXIT_VERIFY = 0, 1, 2, 3
CSV_HEADER = "eta,alpha,beta,c_lower,c_upper"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _fmt(x) -> str:
    return "%.17g" % x


# ----------------------------------------------------------------------
# subcommands; each returns (text, exit status)
# ----------------------------------------------------------------------
def cmd_curve(doc: dict, args) -> tuple[str, int]:
    cfg = SolveConfig.from_document(doc)
    out = io.StringIO(newline="")
    out.write(CSV_HEADER + "\n")
    for eta in cfg.eta_grid:
        env = env_mod.build_envelope(cfg.noise, eta, cfg.n_samples)
        b, lo, hi = env_mod.frontier(env, cfg.alpha_grid, cfg.M)
        for a, x, y, z in zip(cfg.alpha_grid, b, lo, hi):
            out.write(",".join(map(_fmt, (eta, a, x, y, z))) + "\n")
    return out.getvalue(), EXIT_OK


def cmd_solve(doc: dict, args) -> tuple[str, int]:
    cfg = SolveConfig.from_document(doc)
    return solve_stackelberg(cfg, threads=args.threads).to_json(), EXIT_OK


def _operating_point(doc: dict, section: str, args) -> tuple[SolveConfig, float, float]:
    """``(eta, alpha)`` from a config section, or the solver's equilibrium."""
    cfg = SolveConfig.from_document(doc)
    sec = doc.get(section) or {}
    if not isinstance(sec, dict):
        raise ConfigurationError(f"{section}: expected an object")
    if "eta" in sec and "alpha" in sec:
        return cfg, get_number(sec, "eta", section + "."), get_number(sec, "alpha", section + ".")
    if "eta" in sec or "alpha" in sec:
        raise ConfigurationError(f"{section}: give both eta and alpha, or neither")
    rep = solve_stackelberg(cfg, threads=args.threads)
    return cfg, rep.eta_star, rep.alpha_star


def cmd_synthesize(doc: dict, args) -> tuple[str, int]:
    cfg, eta, alpha = _operating_point(doc, "synthesize", args)
    g = adv.synthesize_optimal_noise(cfg.noise, eta, alpha)
    ev = adv.evaluate(g, cfg.noise, eta)
    body = {"eta": eta, "alpha": alpha, "pa": ev.pa, "mse_mean": ev.mse_mean, **g.to_json()}
    return json.dumps(body, indent=2) + "\n", EXIT_OK


def _sim_config(doc: dict, args) -> tuple[sim.SimConfig, float]:
    sec = doc.get("simulate") or {}
    if not isinstance(sec, dict):
        raise ConfigurationError("simulate: expected an object")
    if "adversary" in sec:
        cfg = SolveConfig.from_document(doc) if "eta_grid" in doc else None
        noise = cfg.noise if cfg else _noise_only(doc)
        eta = get_number(sec, "eta", "simulate.")
        g = adv.DiscreteSymmetricNoise.from_json(sec["adversary"], noise.delta)
    else:
        cfg, eta, alpha = _operating_point(doc, "simulate", args)
        noise = cfg.noise
        g = adv.synthesize_optimal_noise(noise, eta, alpha)
    M = get_number(sec, "M", "simulate.", required=False, default=None, positive=True)
    if M is None:
        M = doc.get("M") or 1000.0 * noise.delta
    n = int(get_number(sec, "n_samples", "simulate.", required=False, default=1_000_000, positive=True))
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    return sim.SimConfig(float(M), float(eta), noise, g, n, seed), float(eta)


def _noise_only(doc: dict):
    from .config import make_noise

    return make_noise(doc, doc.get("_base_dir", "."))


def cmd_simulate(doc: dict, args) -> tuple[str, int]:
    scfg, _ = _sim_config(doc, args)
    if args.dump:
        rows = sim.dump_rounds(scfg)
        with open(args.dump, "w", newline="") as fh:
            fh.write("u,y1,y2,accepted\n")
            for u, y1, y2, a in rows:
                fh.write(f"{_fmt(u)},{_fmt(y1)},{_fmt(y2)},{int(a)}\n")
    stats = sim.simulate(scfg, threads=args.threads)
    body = {
        "M": scfg.M,
        "eta": scfg.eta,
        "master_seed": scfg.master_seed,
        "adversary": scfg.adversary.to_json() if isinstance(scfg.adversary, adv.DiscreteSymmetricNoise) else None,
        **stats.to_dict(),
    }
    return json.dumps(body, indent=2) + "\n", EXIT_OK


def cmd_envelope(doc: dict, args) -> tuple[str, int]:
    cfg = SolveConfig.from_document(doc)
    sec = doc.get("envelope") or {}
    etas = sec.get("eta", cfg.eta_grid.tolist()) if isinstance(sec, dict) else cfg.eta_grid.tolist()
    etas = [etas] if isinstance(etas, (int, float)) else etas
    dump = []
    for eta in etas:
        env = env_mod.build_envelope(cfg.noise, float(eta), cfg.n_samples)
        vq = env.vertex_q
        dump.append({
            "eta": float(eta),
            "n_samples": int(env.q.size),
            "slope_at_zero": env.slope_at_zero,
            "vertices": [[float(q), float(v)] for q, v in zip(vq, env.h_samples[env.vertex])],
        })
    return json.dumps({"envelopes": dump}, indent=2) + "\n", EXIT_OK


def _dc_tolerance(q_dc, mmse: float, pa: float, d_pa=2e-3, d_mmse=5e-2) -> float:
    """Change in the collector's utility induced by the point tolerances."""
    base = float(q_dc(mmse, pa))
    return abs(float(q_dc(mmse, pa + d_pa)) - base) + abs(float(q_dc(mmse + d_mmse, pa)) - base)


def run_verify(doc: dict, seed: int = 0, threads: int = 1) -> dict:
    """Oracle cross-checks for one configuration; returns a JSON-ready report."""
    cfg = SolveConfig.from_document(doc)
    sec = doc.get("verify") or {}
    n_points = int(sec.get("n_points", 6))
    grid_n = int(sec.get("brute_grid_n", 2001))
    support_n = int(sec.get("support_grid_n", 2001))
    mc_n = int(sec.get("mc_samples", 1_000_000))
    rng = np.random.default_rng(seed)
    checks = []

    alphas = cfg.alpha_grid[cfg.alpha_grid >= 0.05]
    alphas = alphas if alphas.size else cfg.alpha_grid
    worst_gap, worst_syn, ok_b, ok_s = 0.0, 0.0, True, True
    points = []
    for _ in range(n_points):
        eta = float(rng.choice(cfg.eta_grid))
        alpha = float(rng.choice(alphas))
        env = env_mod.build_envelope(cfg.noise, eta, cfg.n_samples)
        b = env_mod.beta(env, alpha)
        bf = adv.brute_force_beta(cfg.noise, eta, alpha, grid_n)
        g = adv.synthesize_optimal_noise(cfg.noise, eta, alpha, env)
        syn = abs(adv.evaluate(g, cfg.noise, eta).mse_mean - b)
        ok_b &= (b >= bf - 1e-9) and (b - bf <= 5e-3)
        ok_s &= syn <= 1e-9
        worst_gap, worst_syn = max(worst_gap, b - bf), max(worst_syn, syn)
        points.append([eta, alpha])
    checks.append({"name": "beta_vs_brute_force", "passed": bool(ok_b),
                   "detail": {"points": points, "max_beta_minus_brute": worst_gap}})
    checks.append({"name": "synthesized_noise_attains_beta", "passed": bool(ok_s),
                   "detail": {"max_abs_error": worst_syn}})

    rep = solve_stackelberg(cfg, threads=threads)
    bru = brute_force_stackelberg(cfg, support_n)
    q_dc = parse_utility(cfg.u_dc)
    same_eta = rep.eta_star == bru.eta_star
    point_ok = abs(rep.pa - bru.pa) <= 2e-3 and abs(rep.mmse - bru.mmse) <= 5e-2
    tol = _dc_tolerance(q_dc, rep.mmse, rep.pa)
    value_ok = abs(rep.u_dc - bru.u_dc) <= tol
    # Distinct eta* are accepted only as a near-tie in the leader's value.
    passed = (same_eta and point_ok) or (not same_eta and value_ok)
    checks.append({
        "name": "stackelberg_vs_brute_force",
        "passed": bool(passed),
        "detail": {
            "eta_star": rep.eta_star, "brute_eta_star": bru.eta_star,
            "pa": rep.pa, "brute_pa": bru.pa, "mmse": rep.mmse, "brute_mmse": bru.mmse,
            "u_dc": rep.u_dc, "brute_u_dc": bru.u_dc, "u_dc_tolerance": tol,
        },
    })

    M = cfg.M if cfg.M is not None else 1000.0 * cfg.delta
    scfg = sim.SimConfig(M, rep.eta_star, cfg.noise, rep.noise, mc_n, seed)
    stats = sim.simulate(scfg, threads=threads)
    ev = adv.evaluate(rep.noise, cfg.noise, rep.eta_star)
    pa_ok = abs(stats.pa_hat - ev.pa) <= 4 * stats.pa_stderr + 1e-12
    mse_ok = stats.mse_available and abs(stats.mse_mean_hat - ev.mse_mean) <= 4 * stats.mse_stderr
    checks.append({
        "name": "monte_carlo_agreement",
        "passed": bool(pa_ok and mse_ok),
        "detail": {"pa": ev.pa, "pa_hat": stats.pa_hat, "pa_stderr": stats.pa_stderr,
                   "mse": ev.mse_mean, "mse_hat": stats.mse_mean_hat, "mse_stderr": stats.mse_stderr},
    })
    return {"checks": checks, "passed": all(c["passed"] for c in checks)}


def cmd_verify(doc: dict, args) -> tuple[str, int]:
    seed = args.seed if args.seed is not None else int(doc.get("seed", 0))
    report = run_verify(doc, seed=seed, threads=args.threads)
    return json.dumps(report, indent=2) + "\n", EXIT_OK if report["passed"] else EXIT_VERIFY


COMMANDS = {
    "curve": (cmd_curve, "frontier CSV over the eta and alpha grids"),
    "solve": (cmd_solve, "Stackelberg equilibrium report (JSON)"),
    "synthesize": (cmd_synthesize, "optimal adversary noise at (eta, alpha) (JSON)"),
    "simulate": (cmd_simulate, "Monte Carlo statistics (JSON)"),
    "envelope": (cmd_envelope, "hull vertices of the envelope (JSON)"),
    "verify": (cmd_verify, "oracle cross-checks; exit 3 on failure"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("config_path", nargs="?", help="config file or builtin name (example1..3, fig3)")
    common.add_argument("--config", dest="config_opt", metavar="PATH")
    common.add_argument("--output", "-o", metavar="PATH", help="write here instead of stdout")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="0 = one per CPU; default $GOC_THREADS or 1")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    parser = _Parser(prog="gamecoding", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "simulate":
            p.add_argument("--dump", metavar="CSV", help="per-round dump (u, y1, y2, accepted); small n only")
        else:
            p.set_defaults(dump=None)
    return parser


def _threads(value: int | None) -> int:
    if value is None:
        env = os.environ.get("GOC_THREADS")
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise ConfigurationError(f"GOC_THREADS must be an integer, got {env!r}") from None
    return sim.resolve_threads(value)


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        source = args.config_opt or args.config_path
        if args.config_opt and args.config_path:
            raise _UsageError("give the config either positionally or with --config, not both")
        if not source:
            raise _UsageError("a config file is required")
        args.threads = _threads(args.threads)
        doc = apply_overrides(load_document(source), args.overrides)
        if args.seed is not None:
            doc["seed"] = args.seed
        text, status = COMMANDS[args.command][0](doc, args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConfigurationError, UtilitySyntaxError, MonotonicityError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (GameOfCodingError, RuntimeError, ArithmeticError, AssertionError) as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    if args.output:
        Path(args.output).write_text(text, newline="")
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            sys.stdout = None
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
