"""Tour of the network model: propagate a small constellation, inspect
contact windows and link rates, and build the time-evolving graph that
every planner in this package consumes.

Run from the repository root:  python3 demos/01_constellation_and_teg.py
"""

import json
from pathlib import Path

from stnplan import ScenarioConfig, build_scenario_teg, orbital_period

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    cfg = ScenarioConfig.from_json((ROOT / "configs" / "desk.json").read_text())
    c = cfg.constellation
    print(f"constellation: {c.planes} planes x {c.sats_per_plane} satellites "
          f"at {c.altitude_km:.0f} km, inclination {c.inclination_deg:.0f} deg")
    print(f"orbital period: {orbital_period(c.altitude_km):.0f} s")
    print(f"planning window: {cfg.period_s:.0f} s in "
          f"{cfg.slots} slots of {cfg.slot_length_s:.0f} s\n")

    teg = build_scenario_teg(cfg)
    sats = [n for n, cls in teg.classes.items() if cls == "satellite"]
    ground = [n for n, cls in teg.classes.items() if cls != "satellite"]
    print(f"nodes: {len(sats)} satellites, {len(ground)} ground sites")
    print(f"directed communication links: {len(teg.comm_links())}\n")

    print("satellite-ground contact windows (slot numbers with a usable link):")
    for link in teg.comm_links():
        a, b = teg.classes[link.src], teg.classes[link.dst]
        if "satellite" in (a, b) and a != b:
            slots = [t + 1 for t, up in enumerate(teg.available[link]) if up]
            if slots:
                rate = max(r for r, up in zip(teg.rate[link], teg.available[link]) if up)
                print(f"  {link.src:>3} -> {link.dst:<3} slots {slots} "
                      f"(best rate {rate / 1e6:8.2f} Mbit/s)")

    print("\nper-node compute capacity:")
    print(json.dumps(teg.capacity, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
