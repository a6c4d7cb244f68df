"""TSV tables and key=value manifests."""

from __future__ import annotations

import os

import numpy as np

from .market import EmpiricalHistogram


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    return str(v)


def write_tsv(path, columns: dict) -> None:
    """Write equal-length columns with a header line; floats round-trip exactly."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[k], dtype=float) for k in names])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(names) + "\n")
        np.savetxt(fh, data, fmt="%.17g", delimiter="\t")


def read_tsv(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        data = np.loadtxt(fh, delimiter="\t", ndmin=2)
    if data.size and data.shape[1] != len(header):
        raise ValueError(f"{path}: {data.shape[1]} columns but {len(header)} names")
    return {name: (data[:, i] if data.size else np.empty(0)) for i, name in enumerate(header)}


def write_manifest(path, entries: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in entries.items():
            if v is None:
                continue
            fh.write(f"{k}={format_value(v)}\n")


def read_manifest(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def write_histogram(path, hist: EmpiricalHistogram) -> None:
    write_tsv(path, {"bin_center": hist.bin_centers, "density": hist.density, "errbar": hist.errbar})


def read_histogram(path) -> EmpiricalHistogram:
    """Rebuild a histogram from its TSV; counts follow from ``density / errbar``."""
    t = read_tsv(path)
    centers, dens, err = t["bin_center"], t["density"], t["errbar"]
    if centers.size < 2:
        raise ValueError(f"{path}: a histogram needs at least two bins")
    with np.errstate(divide="ignore", invalid="ignore"):
        counts = np.where(err > 0, np.rint((dens / err) ** 2), 0).astype(np.int64)
    width = float(np.mean(np.diff(centers)))
    bins = centers.size
    return EmpiricalHistogram(centers, dens, err, counts, bins, width * bins, int(counts.sum()))


def ensure_dir(path) -> None:
    os.makedirs(path, exist_ok=True)
