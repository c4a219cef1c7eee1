"""Regenerate the bundled Stockholm scenario files from the adjacency in
``src/siws/data/stockholm_adjacency.txt``.

Usage: python3 scripts/make_stockholm.py
"""

from pathlib import Path

from siws.scenario import bundled_scenarios, save_scenario, stockholm_scenario

DATA = Path(__file__).resolve().parents[1] / "src" / "siws" / "data"


def main():
    for name in bundled_scenarios():
        path = DATA / f"{name}.yaml"
        save_scenario(stockholm_scenario(name), path)
        print(path)


if __name__ == "__main__":
    main()
