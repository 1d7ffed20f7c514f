"""Plain-text output files.

All files are deterministic: no timestamps, '.' decimal separator, floats in
``%.17g`` (snapshots) or ``repr``-exact form, and a ``# config_hash = ...``
header line tying the file to the configuration that produced it.
"""

from __future__ import annotations

import csv
import io as _io
import os
from dataclasses import dataclass

import numpy as np

from . import __version__

HASH_KEY = "config_hash"


def _header(lines: dict) -> str:
    return "".join(f"# {k} = {v}\n" for k, v in lines.items())


def read_header(path) -> dict:
    """Leading '# key = value' comment lines of a file as a dict."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if " = " in body:
                k, v = body.split(" = ", 1)
                out[k.strip()] = v.strip()
    return out


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# -- snapshots ----------------------------------------------------------------

@dataclass
class Snapshot:
    config_hash: str
    time: float
    species: str
    positions: np.ndarray
    velocities: np.ndarray


def format_snapshot(snap: Snapshot) -> str:
    n = len(snap.positions)
    head = _header({HASH_KEY: snap.config_hash, "time_s": f"{snap.time:.17g}",
                    "species": snap.species, "n_ions": n})
    head += "# columns: ion_index x_m y_m z_m vx_m_s vy_m_s vz_m_s\n"
    rows = []
    for i, (p, v) in enumerate(zip(snap.positions, snap.velocities)):
        rows.append(" ".join([str(i)] + [f"{x:.17g}" for x in (*p, *v)]))
    return head + "\n".join(rows) + "\n"


def write_snapshot(path, snap: Snapshot):
    _write(path, format_snapshot(snap))


def read_snapshot(path) -> Snapshot:
    h = read_header(path)
    data = np.loadtxt(path, comments="#", ndmin=2)
    if len(data) != int(h["n_ions"]):
        raise ValueError(f"{path}: {len(data)} rows for n_ions = {h['n_ions']}")
    if not np.array_equal(data[:, 0], np.arange(len(data))):
        raise ValueError(f"{path}: ion indices out of order")
    return Snapshot(h[HASH_KEY], float(h["time_s"]), h["species"], data[:, 1:4], data[:, 4:7])


# -- CSV ----------------------------------------------------------------------

def format_csv(columns, units, rows, meta: dict | None = None) -> str:
    """CSV with a comment header: metadata, then one 'name [unit]' per column."""
    if len(columns) != len(units):
        raise ValueError("one unit per column")
    buf = _io.StringIO()
    buf.write(_header(meta or {}))
    buf.write("# units: " + ", ".join(f"{c} [{u}]" for c, u in zip(columns, units)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def write_csv(path, columns, units, rows, meta=None):
    _write(path, format_csv(columns, units, rows, meta))


def read_csv(path):
    """(columns, rows as lists of strings)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


# -- budget tables ------------------------------------------------------------

BUDGET_COLUMNS = ("effect", "conditions", "shift", "signed_shift", "uncertainty",
                  "broadening", "long_term", "in_broadening_total", "notes")
BUDGET_UNITS = ("", "", "Hz", "Hz", "Hz", "Hz", "1", "", "")


def budget_rows(budget):
    rows = []
    for e in budget.entries:
        rows.append([e.effect_name, e.conditions, e.tabulated_shift, e.shift, e.uncertainty,
                     e.broadening_halfwidth, e.long_term_fractional,
                     "true" if e.in_broadening_total else "false", e.notes])
    rows.append(["total", budget.broadening_mode, budget.total_shift, budget.total_physical_shift,
                 0.0, budget.total_broadening, budget.total_long_term, "", ""])
    for e in budget.supplementary:
        rows.append([e.effect_name + " (supplementary)", e.conditions, e.tabulated_shift, e.shift,
                     e.uncertainty, e.broadening_halfwidth, e.long_term_fractional, "false", e.notes])
    return rows


def format_budget_csv(budget, meta=None) -> str:
    return format_csv(BUDGET_COLUMNS, BUDGET_UNITS, budget_rows(budget), meta)


def _sig(x, digits=3):
    return "-" if x == 0 else f"{x:.{digits}g}"


def format_budget_table(budget, meta=None) -> str:
    """Human-readable table: effect, conditions, |shift|, broadening, long-term."""
    head = _header(meta or {})
    lines = [f"{'Effect':<28}{'Conditions':<18}{'Shift (Hz)':>12}{'Broad. (Hz)':>13}{'Long-term':>12}"]
    lines.append("-" * len(lines[0]))

    def line(name, cond, shift, unc, broad, lt):
        s = _sig(shift, 4) + (f"({_sig(unc, 2)})" if unc else "")
        b = "-" if broad == 0 else f"+-{_sig(broad)}"
        lines.append(f"{name:<28}{cond:<18}{s:>12}{b:>13}{_sig(lt, 2):>12}")

    for e in budget.entries:
        line(e.effect_name, e.conditions, e.tabulated_shift, e.uncertainty,
             e.broadening_halfwidth, e.long_term_fractional)
    lines.append("-" * len(lines[0]))
    line("Total", budget.broadening_mode, budget.total_shift, 0.0,
         budget.total_broadening, budget.total_long_term)
    for e in budget.supplementary:
        line(e.effect_name + " *", e.conditions, e.shift, 0.0, e.broadening_halfwidth,
             e.long_term_fractional)
    if budget.supplementary:
        lines.append("* signed, not included in the totals")
    return head + "\n".join(lines) + "\n"


def run_metadata(cfg, extra: dict | None = None) -> dict:
    meta = {HASH_KEY: cfg.config_hash(), "mode": cfg.mode, "seed": cfg.seed,
            "code_version": __version__}
    meta.update(extra or {})
    return meta


def write_config_copy(path, cfg):
    _write(path, cfg.canonical())


def verify_directory(directory, cfg=None) -> list[str]:
    """Files whose header hash disagrees with the directory's config.cfg (or ``cfg``)."""
    from .config import load_run_config

    if cfg is None:
        cfg = load_run_config(os.path.join(directory, "config.cfg"))
    want = cfg.config_hash()
    bad = []
    for name in sorted(os.listdir(directory)):
        path = os.path.join(directory, name)
        if name == "config.cfg" or not os.path.isfile(path):
            continue
        if read_header(path).get(HASH_KEY) != want:
            bad.append(name)
    return bad
