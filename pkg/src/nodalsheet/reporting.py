"""Artifact emission: report.json, samples.csv, CSV dumps, PNG heatmaps,
run manifests and the flat key=value config-file format.

All files are UTF-8 with LF line endings; PNGs carry no timestamps so a
rerun with the same seed is byte-identical.
"""
from __future__ import annotations

import csv
import datetime
import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from PIL import Image

from . import __version__
from .experiments import StatsReport


class ReportValueError(ValueError):
    """A report carried NaN/inf; refusing to serialize it silently."""


# ---------------------------------------------------------------------------
# config files: flat key=value with section prefixes ("experiment.N=2000")


class ConfigError(ValueError):
    pass


def parse_config_file(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def resolve_option(cli_value, file_values: dict, key: str, default, cast):
    """Config precedence: CLI flag > config file > default."""
    if cli_value is not None:
        return cli_value
    if key in file_values:
        try:
            return cast(file_values[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {file_values[key]!r}") from exc
    return default


# ---------------------------------------------------------------------------
# manifests


@dataclass
class RunManifest:
    command: str
    config: dict
    base_seed: Optional[int]
    artifacts: list = field(default_factory=list)
    tool_version: str = __version__
    started: str = ""
    finished: str = ""
    error: str = ""

    def write(self, directory) -> str:
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, "manifest.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.__dict__, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# report + samples emission


def _check_finite(obj, path="report"):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{path}[{i}]")
    elif isinstance(obj, float) and not math.isfinite(obj):
        raise ReportValueError(f"non-finite value at {path}: {obj!r}")


def write_report(report: StatsReport, directory) -> dict:
    """Emit report.json and samples.csv; refuses NaN/inf estimates.

    report.json keeps the deterministic statistics under "results" and the
    wall time under "runtime" so reruns with one config and seed produce
    bit-identical result fields.
    """
    os.makedirs(directory, exist_ok=True)
    results = report.results_dict()
    _check_finite(results)
    doc = {"results": results, "runtime": {"wall_time_s": report.wall_time_s}}
    report_path = os.path.join(directory, "report.json")
    with open(report_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    samples_path = os.path.join(directory, "samples.csv")
    with open(samples_path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rep", "seed", "stat_name", "value"])
        for rep, seed, name, value in report.samples:
            if not math.isfinite(value):
                raise ReportValueError(f"non-finite sample {name} at rep {rep}")
            writer.writerow([rep, seed, name, repr(value)])
    return {"report": report_path, "samples": samples_path}


def read_report(directory) -> dict:
    with open(os.path.join(directory, "report.json"), encoding="utf-8") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# CSV dumps


def write_xi_csv(xi_values: np.ndarray, path) -> None:
    """Lattice dump with header t1,...,td,xi in row-major order."""
    d = xi_values.ndim
    m = xi_values.shape[0] - 1
    ticks = np.arange(m + 1) / m
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"t{i + 1}" for i in range(d)] + ["xi"])
        if d == 1:
            for i, v in enumerate(xi_values):
                writer.writerow([repr(ticks[i]), repr(float(v))])
        else:
            for i in range(m + 1):
                for j in range(m + 1):
                    writer.writerow([repr(ticks[i]), repr(ticks[j]),
                                     repr(float(xi_values[i, j]))])


def write_radial_profile_csv(profile, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["r", "rho2", "F2", "err"])
        for r, r2, f2, err in zip(profile.r, profile.rho2, profile.F2, profile.err):
            writer.writerow([repr(float(r)), repr(float(r2)),
                             repr(float(f2)), repr(float(err))])


def write_cdf_csv(lambdas, empirical, theoretical, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["lambda", "empirical", "theoretical"])
        for lam, emp, theo in zip(lambdas, empirical, theoretical):
            writer.writerow([repr(float(lam)), repr(float(emp)), repr(float(theo))])


def write_curve_csv(curve, path, n_points: int = 257) -> None:
    xs = np.linspace(0.0, 1.0, n_points)
    ys = curve.y_of_x(xs)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y"])
        for x, y in zip(xs, ys):
            writer.writerow([repr(float(x)), repr(float(y))])


# ---------------------------------------------------------------------------
# heatmaps

# compact viridis-like gradient; anchors interpolated linearly to 256 colors
_CMAP_ANCHORS = np.array([
    (68, 1, 84), (71, 44, 122), (59, 81, 139), (44, 113, 142),
    (33, 144, 141), (39, 173, 129), (92, 200, 99), (170, 220, 50),
    (253, 231, 37),
], dtype=float)


def _lut() -> np.ndarray:
    pos = np.linspace(0.0, 1.0, len(_CMAP_ANCHORS))
    grid = np.linspace(0.0, 1.0, 256)
    return np.stack(
        [np.interp(grid, pos, _CMAP_ANCHORS[:, c]) for c in range(3)], axis=1
    ).astype(np.uint8)


_LUT = _lut()


def render_heatmap(values: np.ndarray, path, *, upscale: Optional[int] = None) -> dict:
    """Linear-colormap PNG (row-major, top-down) plus a min/max sidecar JSON."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError("heatmap needs a 2-d lattice")
    vmin, vmax = float(arr.min()), float(arr.max())
    span = vmax - vmin
    norm = np.zeros_like(arr) if span == 0 else (arr - vmin) / span
    idx = np.clip((norm * 255).astype(int), 0, 255)
    rgb = _LUT[idx]
    if upscale is None:
        upscale = max(1, 512 // max(arr.shape))
    if upscale > 1:
        rgb = np.repeat(np.repeat(rgb, upscale, axis=0), upscale, axis=1)
    img = Image.fromarray(rgb, mode="RGB")
    img.save(path, format="PNG")
    sidecar = {"min": vmin, "max": vmax, "rows": int(arr.shape[0]),
               "cols": int(arr.shape[1]), "upscale": int(upscale)}
    with open(str(path) + ".json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar
