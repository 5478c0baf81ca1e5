"""Regenerate the three figure datasets as CSV.

    python3 scripts/reproduce_figures.py --out figures --jobs 1
    python3 scripts/reproduce_figures.py --quick      # sizes 256, 512 only

The full run does five seeds at every size up to 4096; budget about 25 minutes
on one core.  Rows come out sorted by (d, seed), so any --jobs gives the same
bytes.
"""

import argparse
import sys
import time

from kroninfer.cli import main as kroninfer

QUICK_SIZES = "256,512"


def parse_args(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="figures")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--quick", action="store_true", help="small sizes, for a smoke test")
    return ap.parse_args(argv)


def run(argv):
    t0 = time.perf_counter()
    code = kroninfer(argv)
    print(f"  {' '.join(argv[:1])}: exit {code} in {time.perf_counter() - t0:.1f}s")
    if code:
        sys.exit(code)


def main(argv=None):
    args = parse_args(argv)
    common = ["--out", args.out, "--jobs", str(args.jobs), "--seed", args.seeds]
    sweep = ["--sizes", QUICK_SIZES] if args.quick else []
    run(["fig-shrinkage", *common, *sweep])
    run(["fig-opnorm", *common, *sweep])
    # the spectrum figure is one large instance; the quick variant needs the
    # halved X because the standard one is inadmissible below d = 757
    spectrum = ["--sizes", "512", "--x=-2.75,2.75,-0.75,0.75"] if args.quick else []
    run(["fig-spectrum", "--out", args.out, "--seed", args.seeds.split(",")[0], *spectrum])


if __name__ == "__main__":
    main()
