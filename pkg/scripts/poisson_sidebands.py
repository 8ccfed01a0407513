"""Single-mode lineshape: fitted sideband weights against e^-S S^n / n!."""

import argparse
import math

from qemit import lineshape as ls
from qemit.constants import HR_CONSTANT


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--hw", type=float, default=50.0, help="mode energy, meV")
    p.add_argument("--gamma", type=float, default=0.5, help="Lorentzian HWHM, meV")
    p.add_argument("--step", type=float, default=0.1, help="phonon grid step, meV")
    p.add_argument("-S", type=float, nargs="+", default=[0.5, 1.0, 3.0])
    p.add_argument("--n-max", type=int, default=4)
    args = p.parse_args(argv)

    print(f"{'S':>5} {'n':>3} {'fitted':>10} {'poisson':>10} {'diff':>10}")
    worst = 0.0
    for S in args.S:
        proj = [ls.ModeProjection(0, args.hw, math.sqrt(S / (HR_CONSTANT * args.hw)), S)]
        sf = ls.spectral_function(proj, ls.phonon_grid(proj, args.step, 3.0), 3.0)
        spec = ls.generating_lineshape(sf, 1.2, args.gamma)
        w = ls.sideband_weights(spec, args.hw, n_max=args.n_max)
        for n, wn in enumerate(w):
            ref = math.exp(-S) * S**n / math.factorial(n)
            worst = max(worst, abs(wn - ref))
            print(f"{S:5.2f} {n:3d} {wn:10.6f} {ref:10.6f} {wn - ref:+10.2e}")
    print(f"max |diff| = {worst:.2e}")


if __name__ == "__main__":
    main()
