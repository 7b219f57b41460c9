"""Rewrite the golden CLI outputs: ``python tests/golden/regenerate.py``."""

from pathlib import Path

from gamecoding.cli import main

HERE = Path(__file__).parent

CASES = {
    "solve_example1.json": ["solve", "example1"],
    "solve_example2.json": ["solve", "example2"],
    "solve_example3.json": ["solve", "example3"],
    "solve_fig3.json": ["solve", "fig3"],
    "synthesize_example1.json": ["synthesize", "example1"],
    "envelope_eta2.json": ["envelope", "example1", "--set", "envelope.eta=[2, 2.5]", "--set", "n_samples=64"],
    "curve_small.csv": ["curve", "fig3", "--set", "eta_grid=[2, 4]", "--set", "alpha_grid={\"min\": 0.1, \"max\": 1, \"step\": 0.3}", "--set", "M=100"],
    "simulate_small.json": ["simulate", "example1", "--set", "simulate={\"eta\": 4, \"alpha\": 0.5, \"n_samples\": 20000}", "--seed", "7"],
}

if __name__ == "__main__":
    for name, argv in CASES.items():
        status = main([*argv, "--output", str(HERE / name)])
        print(name, status)
