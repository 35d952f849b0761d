"""Solve one small instance three ways and compare.

A hand-sized line network carries a single service whose real VNF must
be deployed on an intermediate node while the data hops toward the
ground station. We solve the full binary program with branch and bound,
again with the decomposition branch-and-cut, and finally with the fast
layered-graph heuristic, then check every answer with the independent
plan validator.

Run from the repository root:  python3 demos/02_exact_vs_heuristic.py
"""

from stnplan import (LatencyParams, ServiceRequest, bb_solve, bdbc_solve,
                     build_full_model, export_lp, make_teg, objective, tedg_plan,
                     validate_plan)
from stnplan.ilp import assignment_to_plan

PARAMS = LatencyParams(epsilon=4e-5, prop_speed=3e8, slot_length=100.0)


def build_instance():
    teg = make_teg(
        {
            "UA": ("groundUser", 0.0),
            "S1": ("satellite", 100.0),
            "S2": ("satellite", 200.0),
            "GB": ("groundStation", 200.0),
        },
        slots=4, slot_length=PARAMS.slot_length,
        comm={
            ("UA", "S1"): {"available": [1, 1, 0, 1], "rate": 2e7, "distance": 1000.0},
            ("S1", "S2"): {"available": [1, 0, 1, 1], "rate": 5e7, "distance": 1500.0},
            ("S2", "GB"): {"available": [0, 1, 1, 1], "rate": 2e7, "distance": 1200.0},
        })
    size = 1.0e8
    service = ServiceRequest(
        id=1, source="UA", destination="GB", data_size=size,
        compute_rate=size * PARAMS.epsilon / PARAMS.slot_length,
        vnf_costs=(0.0, 20.0, 0.0))
    return teg, [service]


def main() -> None:
    teg, services = build_instance()
    model = build_full_model(teg, services, PARAMS)
    print(f"binary program: {model.num_vars} variables, "
          f"{model.num_rows} constraints")
    print("first lines of the LP export:")
    print("\n".join(export_lp(model).splitlines()[:6]), "\n  ...\n")

    exact = bb_solve(model)
    print(f"branch and bound:      {exact.status}, objective "
          f"{exact.objective}, {exact.nodes} nodes")

    benders = bdbc_solve(teg, services, PARAMS, full=model)
    print(f"decomposition solver:  {benders.status}, objective "
          f"{benders.objective}, {len(benders.cuts)} cuts")

    plan = tedg_plan(teg, services, PARAMS, k=20)
    heur = objective(plan, services, PARAMS)
    print(f"layered heuristic:     completes service at slot "
          f"{plan.completion.get(1)}, objective {heur}")

    for name, p in (("exact", assignment_to_plan(model, exact.x, teg, services)),
                    ("heuristic", plan)):
        violations = validate_plan(p, teg, services, PARAMS)
        print(f"validator on the {name} plan: "
              f"{'clean' if not violations else violations}")
    gap = (heur - exact.objective) / exact.objective
    print(f"heuristic optimality gap: {100 * gap:.1f}%")


if __name__ == "__main__":
    main()
