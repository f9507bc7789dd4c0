"""Download the California Housing data and write it as a CSV for the CLI.

Needs scikit-learn and network access; it is not a package dependency.

    python3 scripts/fetch_california_housing.py [--out data/california_housing.csv]
"""
import argparse
import csv
from pathlib import Path


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "california_housing.csv"))
    args = parser.parse_args()

    from sklearn.datasets import fetch_california_housing

    bunch = fetch_california_housing()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*bunch.feature_names, "target"])
        for x, y in zip(bunch.data, bunch.target):
            w.writerow([repr(float(v)) for v in x] + [repr(float(y))])
    print(f"wrote {len(bunch.target)} rows to {out}")


if __name__ == "__main__":
    main()
