"""CSV and text formats for matrices, histograms, distributions and records."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .matrix import ConditionalMatrix, PhotonDistribution
from .reconstruction import ConfidenceTable, CountHistogram
from .simulator import ClickRecord

PathLike = str | Path


def _fmt(x: float) -> str:
    return repr(float(x))


def _rows(path: PathLike) -> list[list[str]]:
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row and not row[0].startswith("#")]


def write_matrix_csv(matrix: ConditionalMatrix, path: PathLike) -> None:
    """Rows k, columns n; the header row lists n and the first column k."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k\\n", *range(matrix.n_max + 1)])
        for k, row in enumerate(matrix.p):
            w.writerow([k, *map(_fmt, row)])


def read_matrix_csv(path: PathLike) -> ConditionalMatrix:
    rows = _rows(path)
    try:
        p = np.array([[float(x) for x in row[1:]] for row in rows[1:]])
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"{path}: malformed matrix CSV") from exc
    return ConditionalMatrix(p)


def write_histogram_csv(hist: CountHistogram, path: PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "count"])
        w.writerows(enumerate(hist.counts.tolist()))


def read_histogram_csv(path: PathLike) -> CountHistogram:
    rows = _rows(path)
    if not rows or [c.strip() for c in rows[0]] != ["k", "count"]:
        raise ValidationError(f"{path}: expected header 'k,count'")
    try:
        pairs = sorted((int(k), int(c)) for k, c in rows[1:])
    except ValueError as exc:
        raise ValidationError(f"{path}: malformed histogram row ({exc})") from exc
    ks = [k for k, _ in pairs]
    if ks != list(range(len(ks))):
        raise ValidationError(f"{path}: k must run 0..N without gaps")
    return CountHistogram(np.array([c for _, c in pairs]))


def write_distribution_csv(dist: PhotonDistribution, path: PathLike) -> None:
    err = dist.std_err
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "probability", "std_err"])
        for n, r in enumerate(dist.rho):
            w.writerow([n, _fmt(r), "" if err is None else _fmt(err[n])])


def read_distribution_csv(path: PathLike, signed: bool = True) -> PhotonDistribution:
    rows = _rows(path)
    if not rows or [c.strip() for c in rows[0]] != ["n", "probability", "std_err"]:
        raise ValidationError(f"{path}: expected header 'n,probability,std_err'")
    body = rows[1:]
    rho = np.array([float(r[1]) for r in body])
    errs = [r[2] if len(r) > 2 else "" for r in body]
    std = None if all(e == "" for e in errs) else np.array([float(e) if e else math.nan for e in errs])
    return PhotonDistribution(rho=rho, signed=signed, std_err=std)


def write_confidence_csv(table: ConfidenceTable, path: PathLike) -> None:
    """Two header rows (eta, mean) over the columns, then one row per l."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", *(_fmt(e) for e, _ in table.columns)])
        w.writerow(["mean", *(_fmt(m) for _, m in table.columns)])
        for l, row in zip(table.ls, table.values):
            w.writerow([l, *map(_fmt, row)])


def read_confidence_csv(path: PathLike) -> ConfidenceTable:
    rows = _rows(path)
    if len(rows) < 2 or rows[0][0] != "eta" or rows[1][0] != "mean":
        raise ValidationError(f"{path}: expected 'eta' and 'mean' header rows")
    columns = tuple(zip(map(float, rows[0][1:]), map(float, rows[1][1:])))
    ls = tuple(int(r[0]) for r in rows[2:])
    values = np.array([[float(x) for x in r[1:]] for r in rows[2:]])
    return ConfidenceTable(ls=ls, columns=columns, values=values)


def write_records(records: Iterable[ClickRecord], path: PathLike) -> None:
    """One line per trial: ``index<TAB>m1 m2 ...`` (blank list for no click)."""
    with open(path, "w") as fh:
        for i, rec in enumerate(records):
            fh.write(f"{i}\t{' '.join(map(str, rec.modes))}\n")


def read_records(path: PathLike) -> list[ClickRecord]:
    out = []
    with open(path) as fh:
        for expected, line in enumerate(fh):
            idx, _, modes = line.rstrip("\n").partition("\t")
            if int(idx) != expected:
                raise ValidationError(f"{path}: trial index {idx} out of order")
            out.append(ClickRecord(tuple(int(m) for m in modes.split())))
    return out


def write_manifest(path: PathLike, manifest: dict) -> Path:
    target = Path(str(path) + ".manifest.json")
    target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return target


def write_gnuplot_script(
    data_csv: PathLike,
    script_path: PathLike,
    reference: Sequence[float] | None = None,
    title: str = "",
) -> None:
    """Bars with error bars from a distribution CSV, optional reference dots."""
    lines = [
        "set datafile separator ','",
        "set style fill solid 0.4",
        "set boxwidth 0.6",
        "set xlabel 'photon number n'",
        "set ylabel 'probability'",
        f"set title '{title}'",
    ]
    plot = f"plot '{data_csv}' every ::1 using 1:2 with boxes title 'reconstruction', " \
        f"'' every ::1 using 1:2:3 with yerrorbars notitle"
    if reference is not None:
        lines.append("$ref << EOD")
        lines.extend(f"{n} {_fmt(r)}" for n, r in enumerate(reference))
        lines.append("EOD")
        plot += ", $ref using 1:2 with points pt 7 title 'Poisson fit'"
    lines.append(plot)
    Path(script_path).write_text("\n".join(lines) + "\n")
