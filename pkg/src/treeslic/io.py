"""File formats: tree JSON, per-branch measurement CSV, ground-truth sidecar, reports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .grid import Branch, Bus, ConnectedTree, LineParams, RqmLocation
from .synth import SLOTS, BranchMeasurements, Campaign, GroundTruth

CSV_COLUMNS = ("t", "v_pq_re", "v_pq_im", "v_qp_re", "v_qp_im",
               "i_pq_re", "i_pq_im", "i_qp_re", "i_qp_im")
TRUTH_FILE = "truth.json"


# Tree description.

def tree_to_dict(tree: ConnectedTree) -> dict:
    branches = []
    for br in tree.branches:
        row = {"id": br.id, "from": br.from_bus, "to": br.to_bus,
               "r_db": br.params_db.r, "x_db": br.params_db.x, "b_db": br.params_db.b}
        if br.params_true is not None:
            row.update(r_true=br.params_true.r, x_true=br.params_true.x, b_true=br.params_true.b)
        branches.append(row)
    return {
        "name": tree.name,
        "buses": [{"id": b.id, "name": b.name} for b in tree.buses],
        "branches": branches,
        "rqm": {"branch": tree.rqm.branch, "end": tree.rqm.end},
    }


def _field(obj: Mapping, key: str, where: str):
    try:
        return obj[key]
    except (KeyError, TypeError):
        raise ConfigError(f"tree file: {where} is missing {key!r}") from None


def tree_from_dict(data: Mapping) -> ConnectedTree:
    buses = []
    for k, b in enumerate(_field(data, "buses", "top level")):
        if isinstance(b, Mapping):
            buses.append(Bus(int(_field(b, "id", f"bus {k}")), str(b.get("name", ""))))
        else:
            buses.append(Bus(int(b), str(b)))
    branches = []
    for k, row in enumerate(_field(data, "branches", "top level")):
        where = f"branch {k}"
        try:
            db = LineParams(float(_field(row, "r_db", where)), float(_field(row, "x_db", where)),
                            float(_field(row, "b_db", where)))
            true = None
            if "r_true" in row:
                true = LineParams(float(row["r_true"]), float(row["x_true"]), float(row["b_true"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"tree file: {where}: {exc}") from None
        f, t = int(_field(row, "from", where)), int(_field(row, "to", where))
        name = row.get("id")
        branches.append(Branch(f, t, db, true, None if name in (None, f"{f}-{t}") else str(name)))
    rqm = _field(data, "rqm", "top level")
    return ConnectedTree(buses, branches, RqmLocation(str(_field(rqm, "branch", "rqm")), str(_field(rqm, "end", "rqm"))),
                         name=str(data.get("name", "")))


def load_tree(path) -> ConnectedTree:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"tree file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"tree file {path}: invalid JSON ({exc})") from None
    return tree_from_dict(data)


def save_tree(tree: ConnectedTree, path) -> None:
    write_json(path, tree_to_dict(tree))


# Measurement CSV.

def _fmt(v: float) -> str:
    return repr(float(v))


def _fmt_time(t) -> str:
    if isinstance(t, np.datetime64):
        return str(t)
    return _fmt(t)


def write_measurements_csv(path, meas: BranchMeasurements) -> None:
    t = meas.t if meas.t is not None else np.arange(meas.n, dtype=float)
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            cols = [meas.v_pq, meas.v_qp, meas.i_pq, meas.i_qp]
            for k in range(meas.n):
                row = [_fmt_time(t[k])]
                for c in cols:
                    row += [_fmt(c[k].real), _fmt(c[k].imag)]
                w.writerow(row)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None


def _parse_times(raw: Sequence[str], path) -> np.ndarray:
    try:
        return np.array([float(x) for x in raw])
    except ValueError:
        pass
    out = []
    for k, x in enumerate(raw):
        try:
            out.append(np.datetime64(x.strip(), "s"))
        except ValueError:
            raise DataError(f"{path}: row {k + 2}: malformed timestamp {x!r}") from None
    return np.array(out, dtype="datetime64[s]")


def read_measurements_csv(path, branch: str) -> BranchMeasurements:
    path = Path(path)
    try:
        fh = path.open(newline="")
    except FileNotFoundError:
        raise DataError(f"measurement file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        idx = {c: header.index(c) for c in CSV_COLUMNS}
        times, values = [], []
        for k, row in enumerate(reader):
            if not row:
                continue
            if len(row) < len(header):
                raise DataError(f"{path}: row {k + 2}: expected {len(header)} fields, got {len(row)}")
            times.append(row[idx["t"]])
            vals = []
            for c in CSV_COLUMNS[1:]:
                try:
                    v = float(row[idx[c]])
                except ValueError:
                    raise DataError(f"{path}: row {k + 2}: column {c}: not a number {row[idx[c]]!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {k + 2}: column {c}: non-finite value")
                vals.append(v)
            values.append(vals)
    if not values:
        raise DataError(f"{path}: no data rows")
    a = np.array(values)
    series = [a[:, 2 * k] + 1j * a[:, 2 * k + 1] for k in range(4)]
    return BranchMeasurements(branch, *series, _parse_times(times, path))


# Campaign datasets.

def _cpx(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def _uncpx(v) -> complex:
    return complex(float(v[0]), float(v[1]))


def _truth_to_dict(truth: GroundTruth, tree: ConnectedTree) -> dict:
    return {br.id: {slot: _cpx(truth.ratio_errors[(br.id, slot)]) for slot in SLOTS} for br in tree.branches}


def write_dataset(directory, campaign: Campaign, extra: Mapping | None = None) -> list[Path]:
    """Write per-branch CSVs plus the ground-truth sidecar.

    A single run writes `<branch>.csv` directly in `directory`; several runs
    write `run_000/<branch>.csv`, ... Returns the CSV paths.
    """
    directory = Path(directory)
    tree = campaign.tree
    written = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for j, run in enumerate(campaign.runs):
            sub = directory if campaign.m == 1 else directory / f"run_{j:03d}"
            sub.mkdir(exist_ok=True)
            for br in tree.branches:
                p = sub / f"{br.id}.csv"
                write_measurements_csv(p, run[br.id])
                written.append(p)
    except OSError as exc:
        raise DataError(f"cannot write dataset under {directory}: {exc}") from None
    truth0 = campaign.truths[0]
    fixed = all(t.ratio_errors == truth0.ratio_errors for t in campaign.truths)
    sidecar = {
        "tree": tree_to_dict(tree),
        "runs": campaign.m,
        "params": {br.id: {"r": truth0.params[br.id].r, "x": truth0.params[br.id].x,
                           "b": truth0.params[br.id].b, "m": truth0.m_true[br.id]} for br in tree.branches},
        "ratio_errors": _truth_to_dict(truth0, tree) if fixed else
        [_truth_to_dict(t, tree) for t in campaign.truths],
    }
    if extra:
        sidecar.update(extra)
    write_json(directory / TRUTH_FILE, sidecar)
    return written


def read_truth(directory, tree: ConnectedTree, runs: int) -> list[GroundTruth] | None:
    path = Path(directory) / TRUTH_FILE
    if not path.exists():
        return None
    data = json.loads(path.read_text())
    params = {b: LineParams(v["r"], v["x"], v["b"]) for b, v in data["params"].items()}
    m_true = {b: v.get("m") for b, v in data["params"].items()}
    raw = data["ratio_errors"]
    sets = raw if isinstance(raw, list) else [raw] * runs

    def convert(d):
        return {(b, s): _uncpx(v) for b, slots in d.items() for s, v in slots.items()}

    if isinstance(raw, list):
        return [GroundTruth(params, m_true, convert(d)) for d in sets]
    truth = GroundTruth(params, m_true, convert(raw))
    return [truth] * runs


def read_dataset(directory, tree: ConnectedTree) -> tuple[list[dict[str, BranchMeasurements]], list[GroundTruth] | None]:
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"dataset directory not found: {directory}")
    run_dirs = sorted(p for p in directory.glob("run_*") if p.is_dir()) or [directory]
    runs = []
    for d in run_dirs:
        run = {}
        for br in tree.branches:
            p = d / f"{br.id}.csv"
            if not p.exists():
                raise DataError(f"{d}: no measurements for branch {br.id} (expected {p.name})")
            run[br.id] = read_measurements_csv(p, br.id)
        runs.append(run)
    return runs, read_truth(directory, tree, len(runs))


# Reports.

def _clean(obj):
    if isinstance(obj, complex):
        return _cpx(obj)
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return _clean(obj.item())
    if isinstance(obj, np.complexfloating):
        return _cpx(complex(obj))
    if isinstance(obj, Mapping):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path, obj) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None


def estimate_to_dict(est) -> dict:
    out = {"rqm": {"branch": est.tree.rqm.branch, "end": est.tree.rqm.end}, "runs": est.m, "branches": {}}
    for bid, be in est.branches.items():
        p = est.params(bid)
        f = be.factors
        g = be.gamma
        out["branches"][bid] = {
            "rqm_side_end": be.orientation,
            "m_star": be.m_star,
            "m_star_runs": [None if r is None else r.m_star for r in be.runs],
            "params": None if p is None else {"r": p.r, "x": p.x, "b": p.b},
            "ratios": None if g is None else {"v": g.v, "i_p": g.i_p, "i_q": g.i_q},
            "factors": None if f is None else f.as_dict(),
            "errors": be.errors,
        }
    return out


def report_to_dict(rep) -> dict:
    return {"mu_mare": rep.mu_mare, "runs": rep.m,
            "rqm_reference": {"branch": rep.rqm_slot[0], "slot": rep.rqm_slot[1]},
            "branches": rep.table()}


def write_table_csv(path, rows: Sequence[Mapping], columns: Sequence[str] | None = None) -> None:
    path = Path(path)
    columns = list(columns or (rows[0].keys() if rows else []))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
            w.writeheader()
            for r in rows:
                w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in r.items()})
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc.strerror}") from None
