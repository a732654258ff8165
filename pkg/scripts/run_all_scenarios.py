"""Run every wave-lab scenario with its defaults, one output directory each."""
import argparse
from pathlib import Path

from wavelab import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="wave-lab-runs")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    failed = []
    for name in cli.SCENARIOS:
        code = cli.main([name, "--out", str(Path(args.out) / name), "--jobs", str(args.jobs)])
        if code:
            failed.append(name)
    print("all scenarios passed" if not failed else f"failed: {', '.join(failed)}")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
