"""Desk-scale experiment: completion rate versus node capacity.

Sweeps the compute capacity of satellites and ground stations on the
desk scenario and compares the layered heuristic (residual-aware
max-min edge weights), its equal-weight ablation, the decoupled greedy
baseline, and a genetic-algorithm baseline. Prints the long-format CSV
the experiment harness produces and a small summary table.

Run from the repository root:  python3 demos/03_capacity_sweep.py
"""

from pathlib import Path

from stnplan import GaConfig, ScenarioConfig, sweep

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    cfg = ScenarioConfig.from_json((ROOT / "configs" / "desk.json").read_text())
    cfg.ga = GaConfig(population_size=24, generations=20, rng_seed=3)
    csv_text = sweep("capacity", [100, 200, 300, 400], cfg,
                     algorithms=("tedg", "ew", "dg", "ga"))
    print(csv_text)

    completed = {}
    for line in csv_text.splitlines()[1:]:
        if line.startswith("#"):
            continue
        _axis, value, algo, done, *_rest = line.split(",")
        completed.setdefault(algo, []).append((int(value), done))
    print("completed services by capacity:")
    for algo, points in completed.items():
        series = "  ".join(f"{v}:{d or '-'}" for v, d in points)
        print(f"  {algo:>4}  {series}")


if __name__ == "__main__":
    main()
