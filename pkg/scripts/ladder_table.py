"""Build a ladder of g functions and print its rung geometry and integrals."""
import argparse
import math

from wavelab.gfun import build_ladder, check_ladder, rung_integral


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--A", type=float, default=10.0)
    ap.add_argument("--rungs", type=int, default=6)
    ap.add_argument("--save", default="")
    args = ap.parse_args()
    ladder = build_ladder(args.A, args.rungs)
    print(f"{'i':>2} {'log start':>12} {'log Cp_i':>12} {'log C_i':>12} {'integral':>12}")
    for r in ladder.rungs:
        val = rung_integral(ladder.g(r.i), r.start, r.Cp)
        C = ladder.C(r.i)
        logC = f"{math.log(C):12.4f}" if C is not None else f"{'open':>12}"
        print(f"{r.i:>2} {r.log_start:12.4f} {math.log(r.Cp):12.4f} {logC} {val:12.4f}")
    bad = check_ladder(ladder)
    print("invariants hold" if not bad else "\n".join(bad))
    if args.save:
        ladder.save(args.save)


if __name__ == "__main__":
    main()
