"""Windowed S-norm growth for the focusing and defocusing equations from the same bump."""
import argparse

from wavelab import profiles
from wavelab.analysis import blowup_monitor
from wavelab.gfun import ConstantG
from wavelab.propagator import SolverConfig, evolve
from wavelab.spectral import RadialGrid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--amplitude", type=float, default=2.0)
    ap.add_argument("--T", type=float, default=3.0)
    ap.add_argument("--window", type=float, default=0.1)
    args = ap.parse_args()
    grid = RadialGrid(20.0, 1024)
    data = profiles.gaussian_bump(grid, args.amplitude, 1.0)
    for sign, label in ((1.0, "focusing"), (-1.0, "defocusing")):
        traj, ledger = evolve(data, SolverConfig(5.0, ConstantG(1.0), 1e-3, args.T, 0.01, grid,
                                                 sign=sign))
        rep = blowup_monitor(ledger, args.window)
        print(f"{label:>10}: verdict={rep.verdict}, reached t={traj.times[-1]:.3f}, "
              f"last window S-norms={[round(q, 4) for q in rep.window_q[-3:]]}")


if __name__ == "__main__":
    main()
