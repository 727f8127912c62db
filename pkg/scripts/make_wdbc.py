"""Write data/wdbc.data in the UCI layout from the copy bundled with scikit-learn.

The bundled table drops the case ids, so rows get sequential ids (1..569).
Row order, feature order and decimal text are kept as shipped.
"""
import csv
import sys
from pathlib import Path

import sklearn.datasets

src = Path(sklearn.datasets.__file__).parent / "data" / "breast_cancer.csv"
out = Path(sys.argv[1] if len(sys.argv) > 1 else "data/wdbc.data")

with open(src, newline="") as fh, open(out, "w", newline="") as dst:
    reader = csv.reader(fh)
    next(reader)  # "569,30,malignant,benign"
    for i, row in enumerate(reader, start=1):
        *feats, target = row
        diag = "M" if target == "0" else "B"
        dst.write(",".join([str(i), diag, *feats]) + "\n")
