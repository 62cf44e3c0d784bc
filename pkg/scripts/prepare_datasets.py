#!/usr/bin/env python3
"""Materialize the benchmark CSVs under data/.

Iris ships with scikit-learn, so it is written unconditionally.  The other
UCI tables (ionosphere first among them) are fetched from OpenML when the
network allows; pass --skip-fetch to only write the bundled ones.

Each CSV gets a header row and the class label in the last column, which is
what the default CLI configs expect.
"""

import argparse
import sys
from pathlib import Path

import numpy as np


def write_csv(path: Path, features, labels, feature_names, label_name="label"):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join([*feature_names, label_name]) + "\n")
        for row, label in zip(features, labels):
            cells = [repr(float(v)) for v in row]
            fh.write(",".join([*cells, str(label)]) + "\n")
    print(f"wrote {path} ({len(labels)} rows)")


def write_iris(out_dir: Path):
    from sklearn.datasets import load_iris

    bunch = load_iris()
    names = [n.replace(" (cm)", "").replace(" ", "_") for n in bunch.feature_names]
    labels = [bunch.target_names[t] for t in bunch.target]
    write_csv(out_dir / "iris.csv", bunch.data, labels, names, label_name="species")


def fetch_openml_csv(out_dir: Path, name: str, version: int = 1):
    from sklearn.datasets import fetch_openml

    bunch = fetch_openml(name=name, version=version, as_frame=True, parser="auto")
    frame = bunch.frame
    target_col = bunch.target_names[0]
    feature_cols = [c for c in frame.columns if c != target_col]
    features = frame[feature_cols].to_numpy(dtype=float)
    labels = frame[target_col].astype(str).to_numpy()
    keep = ~np.isnan(features).any(axis=1)
    write_csv(out_dir / f"{name.lower()}.csv", features[keep], labels[keep], feature_cols)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data", help="output directory")
    parser.add_argument("--skip-fetch", action="store_true", help="write only bundled datasets")
    args = parser.parse_args()
    out_dir = Path(args.out)
    write_iris(out_dir)
    if args.skip_fetch:
        return 0
    for name in ("ionosphere", "balance-scale", "glass", "diabetes"):
        try:
            fetch_openml_csv(out_dir, name)
        except Exception as exc:
            print(f"could not fetch {name}: {exc}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
