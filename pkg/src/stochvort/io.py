"""CSV persistence for grid and spectral fields."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .spectral import GridField, SpectralField, conj_flip


def write_grid_csv(path: Path, g: GridField) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"n={g.n}\n")
        w = csv.writer(fh)
        for row in g.values:
            w.writerow([repr(float(v)) for v in row])


def read_grid_csv(path: Path) -> GridField:
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if not header.startswith("n="):
            raise ValueError(f"{path}: grid CSV must start with 'n=<n>'")
        n = int(header[2:])
        rows = [[float(v) for v in r] for r in csv.reader(fh) if r]
    vals = np.array(rows)
    if vals.shape != (n, n):
        raise ValueError(f"{path}: expected {n}x{n} values, got {vals.shape}")
    return GridField(vals)


def write_spectral_csv(path: Path, f: SpectralField) -> None:
    K = f.cutoff
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k1", "k2", "re", "im"])
        for k1 in range(-K, K + 1):
            for k2 in range(-K, K + 1):
                c = f.coeffs[k1 + K, k2 + K]
                w.writerow([k1, k2, repr(float(c.real)), repr(float(c.imag))])


def read_spectral_csv(path: Path) -> SpectralField:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        head = next(r)
        if [h.strip() for h in head] != ["k1", "k2", "re", "im"]:
            raise ValueError(f"{path}: spectral CSV header must be k1,k2,re,im")
        rows = [(int(a), int(b), float(c), float(d)) for a, b, c, d in r]
    K = max(max(abs(a), abs(b)) for a, b, _, _ in rows)
    c = np.zeros((2 * K + 1, 2 * K + 1), dtype=complex)
    for k1, k2, re, im in rows:
        c[k1 + K, k2 + K] = re + 1j * im
    # rows listing only one of each conjugate pair are completed
    missing = (c == 0) & (conj_flip(c) != 0)
    c[missing] = conj_flip(c)[missing]
    return SpectralField(c)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_rows(path: Path, columns: list[str], rows) -> None:
    """CSV with a header row; floats use ``repr`` so values round-trip exactly."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])
