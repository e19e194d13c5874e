#!/usr/bin/env python3
"""Download the real datasets into data/<name>.csv.

Every output file has the feature columns first and a final `target` column.
Pima labels are written as 0/1.

    python3 scripts/fetch_data.py [pima] [wine] [liver]
"""

import csv
import io
import lzma
import sys
import urllib.request
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

PIMA_URL = "https://raw.githubusercontent.com/jbrownlee/Datasets/master/pima-indians-diabetes.data.csv"
PIMA_COLUMNS = ["pregnancies", "glucose", "blood_pressure", "skin_thickness", "insulin", "bmi", "pedigree", "age"]
WINE_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/wine-quality/winequality-white.csv"
LIVER_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases/liver-disorders/bupa.data"
LIVER_COLUMNS = ["mcv", "alkphos", "sgpt", "sgot", "gammagt"]


def fetch(url):
    with urllib.request.urlopen(url, timeout=30) as r:
        return r.read().decode("utf-8")


def write(name, header, rows):
    DATA_DIR.mkdir(exist_ok=True)
    path = DATA_DIR / f"{name}.csv"
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header + ["target"])
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def pima_from_rdatasets():
    """MASS Pima.tr + Pima.te (532 complete cases, no insulin column)."""
    import importlib.util

    import pandas as pd

    spec = importlib.util.find_spec("rdatasets")
    if spec is None:
        raise RuntimeError("install the `rdatasets` package for the offline fallback")
    base = Path(spec.origin).parent / "_data" / "MASS"
    frames = [pd.read_pickle(io.BytesIO(lzma.decompress((base / f"Pima.{p}.pkl.compress").read_bytes()))) for p in ("tr", "te")]
    df = pd.concat(frames, ignore_index=True)
    cols = ["npreg", "glu", "bp", "skin", "bmi", "ped", "age"]
    rows = [[*r[cols].tolist(), int(r["type"] == "Yes")] for _, r in df.iterrows()]
    return cols, rows


def pima():
    try:
        rows = [line.split(",") for line in fetch(PIMA_URL).split() if line]
        return PIMA_COLUMNS, [[*r[:8], int(float(r[8]))] for r in rows]
    except OSError as e:
        print(f"pima download failed ({e}); using the MASS copy from rdatasets", file=sys.stderr)
        return pima_from_rdatasets()


def wine():
    lines = list(csv.reader(io.StringIO(fetch(WINE_URL)), delimiter=";"))
    header = [h.strip().replace(" ", "_") for h in lines[0][:-1]]
    return header, [r for r in lines[1:] if r]


def liver_rows(text):
    rows = [[v.strip() for v in line.split(",")] for line in text.splitlines() if line.strip() and not line.startswith("@")]
    # drinks is the response; the selector column is a train/test flag
    return LIVER_COLUMNS, [[*r[:5], r[5]] for r in rows]


def liver_from_keel():
    """The same 345 records as shipped by the `keel_ds` package."""
    import importlib.util

    spec = importlib.util.find_spec("keel_ds")
    if spec is None:
        raise RuntimeError("install the `keel_ds` package for the offline fallback")
    path = Path(spec.origin).parent / "data" / "balanced" / "raw" / "bupa.dat"
    return liver_rows(path.read_text())


def liver():
    try:
        return liver_rows(fetch(LIVER_URL))
    except OSError as e:
        print(f"liver download failed ({e}); using the KEEL copy from keel_ds", file=sys.stderr)
        return liver_from_keel()


SOURCES = {"pima": pima, "wine": wine, "liver": liver}


def main(names):
    failed = False
    for name in names or SOURCES:
        if name not in SOURCES:
            sys.exit(f"unknown dataset {name!r}; choose from {', '.join(SOURCES)}")
        try:
            write(name, *SOURCES[name]())
        except Exception as e:  # report and keep going with the others
            print(f"{name}: {e}", file=sys.stderr)
            failed = True
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main(sys.argv[1:])
