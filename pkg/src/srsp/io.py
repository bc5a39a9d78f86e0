"""Run configuration, CSV output, binary snapshots and SVG plots."""

from __future__ import annotations

import configparser
import csv
import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .diagnostics import RECORD_FIELDS, DiagnosticsRecord
from .ensemble import Ensemble, geometric_weights, normalize_weights
from .integrator import SCHEMES, StepParams
from .spectral import DomainSpec


class ConfigError(ValueError):
    """Invalid configuration; the message names the file, line and field."""


class SnapshotError(ValueError):
    """Malformed or incompatible snapshot file."""


# -- configuration -----------------------------------------------------------


@dataclass
class RunConfig:
    """Everything a run, verify or converge invocation needs.

    Defaults (all optional except what a run needs to differ):
    ``[domain] d=1 L=1 N=64 q=2``; ``[physics] m=1 K=4 weights=geometric(0.5)
    coupling=on``; ``[initial] seed=0 damping=1``; ``[integration]
    scheme=strang dt=1e-3 steps=1000 cadence=10 guard_factor=1000``;
    ``[output] directory=out snapshot_cadence=0 plot=off``; ``[verify]
    seed=0 trials=100``; ``[converge] t_final=0.5 dt0=0.02 dt_levels=5
    n_levels=3 ref_factor=64``.
    """

    dom: DomainSpec = field(default_factory=lambda: DomainSpec((1.0,), (64,), 2))
    m: float = 1.0
    K: int = 4
    weights: np.ndarray = field(default_factory=lambda: geometric_weights(4, 0.5))
    coupling: bool = True
    seed: int = 0
    damping: float = 1.0
    snapshot: Path | None = None
    step: StepParams = field(default_factory=lambda: StepParams(1e-3, 1000, "strang", 10, 1e3))
    directory: Path = Path("out")
    snapshot_cadence: int = 0
    plot: bool = False
    verify_seed: int = 0
    verify_trials: int = 100
    t_final: float = 0.5
    dt0: float = 0.02
    dt_levels: int = 5
    n_levels: int = 3
    ref_factor: int = 64
    source: Path | None = None


_KNOWN = {
    "domain": {"d", "L", "N", "q"},
    "physics": {"m", "K", "weights", "coupling"},
    "initial": {"seed", "damping", "snapshot"},
    "integration": {"scheme", "dt", "steps", "cadence", "guard_factor"},
    "output": {"directory", "snapshot_cadence", "plot"},
    "verify": {"seed", "trials"},
    "converge": {"t_final", "dt0", "dt_levels", "n_levels", "ref_factor"},
}

_GEOMETRIC = re.compile(r"^geometric\(\s*([^)]+)\s*\)$")


class _Reader:
    def __init__(self, path: Path, text: str):
        self.path = path
        self.lines = text.splitlines()
        self.cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        self.cp.optionxform = str
        try:
            self.cp.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: parse error: {' '.join(str(exc).split())}") from None

    def line_of(self, section: str, key: str) -> int | None:
        current = None
        for i, line in enumerate(self.lines, 1):
            s = line.strip()
            if s.startswith("[") and s.endswith("]"):
                current = s[1:-1].strip()
            elif current == section and re.match(rf"^{re.escape(key)}\s*[=:]", s):
                return i
        return None

    def fail(self, section: str, key: str, msg: str):
        line = self.line_of(section, key)
        where = f"{self.path}:{line}" if line else str(self.path)
        raise ConfigError(f"{where}: [{section}] {key}: {msg}")

    def raw(self, section, key):
        if self.cp.has_section(section) and self.cp.has_option(section, key):
            return self.cp.get(section, key).strip()
        return None

    def get(self, section, key, conv, default, check=None, rule=""):
        raw = self.raw(section, key)
        if raw is None:
            return default
        try:
            value = conv(raw)
        except (TypeError, ValueError):
            self.fail(section, key, f"cannot parse {raw!r}")
        if check is not None and not check(value):
            self.fail(section, key, f"{raw!r} violates {rule}")
        return value


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.replace(",", " ").split())


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.replace(",", " ").split())


def _bool(raw: str) -> bool:
    value = raw.lower()
    if value in ("on", "true", "yes", "1"):
        return True
    if value in ("off", "false", "no", "0"):
        return False
    raise ValueError(raw)


def _finite_pos(x):
    return math.isfinite(x) and x > 0


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    r = _Reader(path, path.read_text())
    for section in r.cp.sections():
        if section not in _KNOWN:
            raise ConfigError(f"{path}:{_section_line(r, section)}: unknown section [{section}]")
        for key in r.cp.options(section):
            if key not in _KNOWN[section]:
                r.fail(section, key, "unknown key")

    d = r.get("domain", "d", int, 1, lambda v: v in (1, 2, 3), "d in {1, 2, 3}")
    L = r.get("domain", "L", _floats, (1.0,), lambda v: len(v) in (1, d) and all(map(_finite_pos, v)),
              f"L_i > 0 with 1 or {d} entries")
    N = r.get("domain", "N", _ints, (64,), lambda v: len(v) in (1, d) and all(n >= 1 for n in v),
              f"N_i >= 1 with 1 or {d} entries")
    q = r.get("domain", "q", int, 2, lambda v: v >= 2, "q >= 2")
    dom = DomainSpec(L * d if len(L) == 1 else L, N * d if len(N) == 1 else N, q)

    cfg = RunConfig(dom=dom, source=path)
    cfg.m = r.get("physics", "m", float, 1.0, lambda v: math.isfinite(v) and v >= 0, "m >= 0")
    cfg.K = r.get("physics", "K", int, 4, lambda v: 1 <= v <= dom.mode_count,
                  f"1 <= K <= {dom.mode_count} (retained modes)")
    raw_w = r.raw("physics", "weights")
    if raw_w is None:
        cfg.weights = geometric_weights(cfg.K, 0.5)
    else:
        match = _GEOMETRIC.match(raw_w)
        try:
            if match:
                cfg.weights = geometric_weights(cfg.K, float(match.group(1)))
            else:
                w = _floats(raw_w)
                if len(w) != cfg.K:
                    r.fail("physics", "weights", f"{len(w)} weights given for K = {cfg.K}")
                cfg.weights = normalize_weights(w)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            r.fail("physics", "weights", f"{exc} (positivity rule: every lambda_k > 0)"
                   if "positive" in str(exc) else f"cannot parse {raw_w!r}")
    cfg.coupling = r.get("physics", "coupling", _bool, True)

    cfg.seed = r.get("initial", "seed", int, 0, lambda v: v >= 0, "seed >= 0")
    cfg.damping = r.get("initial", "damping", float, 1.0, lambda v: math.isfinite(v) and v >= 0, "damping >= 0")
    snap = r.raw("initial", "snapshot")
    if snap:
        snap_path = Path(snap)
        cfg.snapshot = snap_path if snap_path.is_absolute() else path.parent / snap_path

    scheme = r.get("integration", "scheme", str, "strang", lambda v: v in SCHEMES, f"scheme in {SCHEMES}")
    dt = r.get("integration", "dt", float, 1e-3, _finite_pos, "dt > 0")
    steps = r.get("integration", "steps", int, 1000, lambda v: v >= 0, "steps >= 0")
    cadence = r.get("integration", "cadence", int, 10, lambda v: v >= 1, "cadence >= 1")
    guard = r.get("integration", "guard_factor", float, 1e3, lambda v: math.isfinite(v) and v > 1, "guard_factor > 1")
    cfg.step = StepParams(dt, steps, scheme, cadence, guard)

    directory = Path(r.get("output", "directory", str, "out"))
    cfg.directory = directory if directory.is_absolute() else path.parent / directory
    cfg.snapshot_cadence = r.get("output", "snapshot_cadence", int, 0, lambda v: v >= 0, "snapshot_cadence >= 0")
    cfg.plot = r.get("output", "plot", _bool, False)

    cfg.verify_seed = r.get("verify", "seed", int, 0, lambda v: v >= 0, "seed >= 0")
    # trials is range-checked by the verify command, which reports it as a usage error
    cfg.verify_trials = r.get("verify", "trials", int, 100)

    cfg.t_final = r.get("converge", "t_final", float, 0.5, _finite_pos, "t_final > 0")
    cfg.dt0 = r.get("converge", "dt0", float, 0.02, _finite_pos, "dt0 > 0")
    cfg.dt_levels = r.get("converge", "dt_levels", int, 5, lambda v: v >= 4, "dt_levels >= 4")
    cfg.n_levels = r.get("converge", "n_levels", int, 3, lambda v: v >= 3, "n_levels >= 3")
    cfg.ref_factor = r.get("converge", "ref_factor", int, 64, lambda v: v >= 2, "ref_factor >= 2")
    return cfg


def _section_line(r: _Reader, section: str) -> int:
    for i, line in enumerate(r.lines, 1):
        if line.strip() == f"[{section}]":
            return i
    return 0


# -- CSV ---------------------------------------------------------------------


def format_float(x: float) -> str:
    """Shortest round-trip representation; always '.' as decimal point."""
    return repr(float(x))


class DiagnosticsWriter:
    """Streams records to ``diagnostics.csv`` as they are produced."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._csv = csv.writer(self._fh, lineterminator="\n")
        self._csv.writerow(RECORD_FIELDS)
        self.records: list[DiagnosticsRecord] = []

    def __call__(self, rec: DiagnosticsRecord) -> None:
        self.records.append(rec)
        self._csv.writerow([format_float(v) for v in rec.as_row()])

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_diagnostics(path: str | Path, records: Iterable[DiagnosticsRecord]) -> None:
    with DiagnosticsWriter(path) as w:
        for rec in records:
            w(rec)


def read_diagnostics(path: str | Path) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != RECORD_FIELDS:
        raise ValueError(f"{path}: unexpected diagnostics header")
    return [DiagnosticsRecord(*map(float, row)) for row in rows[1:]]


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


# -- snapshots ---------------------------------------------------------------

MAGIC = b"SRSP"
VERSION = 1


def snapshot_write(e: Ensemble, path: str | Path) -> None:
    """Little-endian: magic, u32 version, u32 d, u32 extent per axis, u32 K, f64 m, K f64 weights,
    then K blocks of (re, im) f64 pairs in row-major mode order.

    The stored extents are those of the coefficient arrays, i.e. the full grid
    mode block of the ensemble's domain.
    """
    extents = e.psi.shape[1:]
    header = MAGIC + struct.pack(f"<II{len(extents)}II", VERSION, len(extents), *extents, e.K)
    header += struct.pack("<d", e.m)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.asarray(e.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(e.psi, dtype="<c16").tobytes())


def snapshot_read_raw(path: str | Path) -> tuple[tuple[int, ...], float, np.ndarray, np.ndarray]:
    """Return (extents, m, weights, psi) without domain validation."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != MAGIC:
        raise SnapshotError(f"{path}: bad magic, not an SRSP snapshot")
    version, d = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version {version}")
    if d not in (1, 2, 3):
        raise SnapshotError(f"{path}: invalid dimension {d}")
    offset = 12
    need = offset + 4 * d + 4 + 8
    if len(data) < need:
        raise SnapshotError(f"{path}: truncated header")
    extents = struct.unpack_from(f"<{d}I", data, offset)
    offset += 4 * d
    (K,) = struct.unpack_from("<I", data, offset)
    (m,) = struct.unpack_from("<d", data, offset + 4)
    offset += 12
    P = math.prod(extents)
    expected = offset + 8 * K + 16 * K * P
    if len(data) != expected:
        raise SnapshotError(f"{path}: size {len(data)} bytes, expected {expected} (truncated or corrupt)")
    weights = np.frombuffer(data, "<f8", K, offset).astype(float)
    psi = np.frombuffer(data, "<c16", K * P, offset + 8 * K).astype(complex).reshape((K,) + tuple(extents))
    return tuple(extents), m, weights, psi


def snapshot_read(path: str | Path, dom: DomainSpec, coupling: bool = True) -> Ensemble:
    extents, m, weights, psi = snapshot_read_raw(path)
    if extents != dom.grid_shape:
        raise SnapshotError(f"{path}: snapshot mode block {extents} does not match domain {dom.grid_shape}")
    return Ensemble(dom, weights, psi, m=m, coupling=coupling)


# -- SVG ---------------------------------------------------------------------


def write_svg(path: str | Path, x: Sequence[float], series: dict[str, Sequence[float]],
              title: str = "", xlabel: str = "t", width: int = 640, height: int = 400) -> None:
    """Minimal line plot: one polyline per series, shared axes, min/max tick labels."""
    x = np.asarray(x, dtype=float)
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    left, right, top, bottom = 90, 20, 40, 50
    ys = np.concatenate([np.asarray(v, dtype=float) for v in series.values()]) if series else np.zeros(1)
    x0, x1 = (float(x.min()), float(x.max())) if x.size else (0.0, 1.0)
    y0, y1 = float(np.min(ys)), float(np.max(ys))
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        pad = abs(y0) * 1e-9 or 1.0
        y0, y1 = y0 - pad, y1 + pad
    pw, ph = width - left - right, height - top - bottom

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{width / 2}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{title}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{left}" y="{height - 28}" font-family="sans-serif" font-size="11">{x0:.6g}</text>',
           f'<text x="{left + pw}" y="{height - 28}" text-anchor="end" font-family="sans-serif" font-size="11">{x1:.6g}</text>',
           f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{xlabel}</text>',
           f'<text x="{left - 6}" y="{top + 10}" text-anchor="end" font-family="sans-serif" font-size="11">{y1:.10g}</text>',
           f'<text x="{left - 6}" y="{top + ph}" text-anchor="end" font-family="sans-serif" font-size="11">{y0:.10g}</text>']
    for i, (name, values) in enumerate(series.items()):
        color = colors[i % len(colors)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, np.asarray(values, dtype=float)))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{left + 8}" y="{top + 16 + 14 * i}" fill="{color}" font-family="sans-serif" '
                   f'font-size="12">{name}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
