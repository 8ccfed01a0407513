"""Formation-energy diagrams for the four toy host energetics (one SVG/CSV pair each)."""

import argparse
from pathlib import Path

from qemit import energetics as en
from qemit import synthetic, writers


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("outdir", nargs="?", default="diagrams")
    p.add_argument("--n-points", type=int, default=1001)
    args = p.parse_args(argv)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for host in synthetic.REFRACTIVE_INDEX:
        d = synthetic.toy_energetics(host)
        diagrams = [en.stability_diagram(d, c, args.n_points) for c in en.CONDITIONS]
        writers.write_diagram_csv(diagrams[0], out / f"{host}_formation.csv")
        writers.write_diagram_svg(diagrams, out / f"{host}_formation.svg", f"{host}: C substitution")
        levels = ", ".join(f"({writers._q(c.q_hi)}|{writers._q(c.q_lo)}) {c.fermi_level:.3f}" for c in diagrams[0].ctls)
        print(f"{host:6s} gap {d.gap:.2f} eV  {levels}")


if __name__ == "__main__":
    main()
