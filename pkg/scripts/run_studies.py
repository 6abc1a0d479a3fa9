"""Run the study configs in scripts/configs through the CLI.

usage: python scripts/run_studies.py [name ...] [--out DIR] [--jobs J]
"""

import argparse
import sys
from pathlib import Path

from slwlab.cli import main

CONFIGS = Path(__file__).parent / "configs"


def run(argv=None) -> int:
    names = sorted(p.stem for p in CONFIGS.glob("*.toml"))
    ap = argparse.ArgumentParser()
    ap.add_argument("studies", nargs="*", help=f"subset of {', '.join(names)}")
    ap.add_argument("--out", default="slwlab-out")
    ap.add_argument("--jobs", default="1")
    ns = ap.parse_args(argv)
    unknown = set(ns.studies) - set(names)
    if unknown:
        ap.error(f"unknown studies: {', '.join(sorted(unknown))}")
    worst = 0
    for name in ns.studies or names:
        print(f"== {name}")
        code = main([name, "--config", str(CONFIGS / f"{name}.toml"), "--out", f"{ns.out}/{name}", "--jobs", ns.jobs])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(run())
