"""Energy drift of the Strang integrator against dt, for g = 1 and the first ladder rung."""
import argparse

from wavelab import profiles
from wavelab.analysis import energy_drift
from wavelab.gfun import ConstantG, build_ladder
from wavelab.propagator import SolverConfig, evolve
from wavelab.spectral import RadialGrid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=1024)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--amplitude", type=float, default=1.5)
    args = ap.parse_args()
    grid = RadialGrid(20.0, args.N)
    data = profiles.gaussian_bump(grid, args.amplitude, 1.0)
    for label, g in (("g=1", ConstantG(1.0)), ("rung 1", build_ladder(10.0, 1).g(1))):
        prev = None
        print(f"{label}:")
        for dt in (4e-3, 2e-3, 1e-3, 5e-4):
            traj, _ = evolve(data, SolverConfig(5.0, g, dt, args.T, 0.04, grid),
                             with_ledger=False)
            drift = energy_drift(traj, 5.0, g)
            ratio = f"{prev / drift:6.3f}" if prev else "     -"
            print(f"  dt={dt:8.1e}  drift={drift:10.3e}  ratio={ratio}")
            prev = drift


if __name__ == "__main__":
    main()
