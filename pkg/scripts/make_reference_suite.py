"""Write the 16-defect fixture suite and optionally run the batch report on it.

    python scripts/make_reference_suite.py fixtures/ --run
"""

import argparse
import sys

from qemit import report, synthetic


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("outdir")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--orbital-format", choices=("json", "text"), default="json")
    p.add_argument("--run", action="store_true", help="also run the report into OUTDIR/out")
    args = p.parse_args(argv)
    manifest = synthetic.write_reference_suite(args.outdir, args.seed, args.orbital_format)
    print(f"manifest: {manifest}")
    if args.run:
        status = report.run_manifest(manifest)
        print(f"report: {manifest.parent / 'out' / 'report.csv'} (status {status})")
        return status
    return 0


if __name__ == "__main__":
    sys.exit(main())
