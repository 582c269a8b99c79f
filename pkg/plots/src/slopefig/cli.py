"""Standalone script face: slopefig <table.csv> <job.json> <figure.png|svg>."""
import argparse
import sys

from . import load_job, render


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="slopefig",
        description="Render an annotated log-log figure from a delimited table.",
    )
    parser.add_argument("csv", help="input table (CSV with a header row)")
    parser.add_argument("job", help="JSON job description (columns, grouping, guides)")
    parser.add_argument("out", help="output image path (.png or .svg)")
    args = parser.parse_args(argv)
    try:
        job = load_job(args.job, input=args.csv, output=args.out)
        slopes = render(job)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for key in sorted(slopes):
        label = key or "all rows"
        slope = slopes[key]
        if slope is None:
            print(f"{label}: too few points for a slope fit")
        else:
            print(f"{label}: slope {slope:.2f}")
    if slopes:
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
