"""Run every scenario config in scenarios/ and print the exit status of each.

    python3 scripts/run_scenarios.py [--out out/]
"""
import argparse
import os
from pathlib import Path

from fbcsf.cli import main

ROOT = Path(__file__).resolve().parent.parent


def run(out):
    codes = {}
    for cfg in sorted((ROOT / "scenarios").glob("*.json")):
        target = os.path.join(out, cfg.stem)
        codes[cfg.stem] = main(["run", str(cfg), "--out", target])
    print()
    for name, code in codes.items():
        print(f"{name:24s} exit={code}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out")
    run(ap.parse_args().out)
