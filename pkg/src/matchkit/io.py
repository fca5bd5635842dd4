"""File formats: market/heterogeneity/shock/basis JSON, matching CSV, draws binary.

Floats are written with 17 significant digits so that every value parses back
to the identical double.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .comparative_statics import ComparativeStaticsReport, Shock
from .equilibrium import EquilibriumResult, SplitUtilities, WelfareVector
from .errors import DimensionMismatch, InvalidSpec
from .heterogeneity import MEN, Logit, SimulatedSmoothed, simulated_from_seed
from .identification import BasisFamily
from .market import SINGLES_LABEL, Matching, ValidatedMarket, validate_market, validate_surplus


class ParseError(ValueError):
    """Malformed input file (CLI exit status 2)."""


# -- JSON ------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite float {x}")
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # numeric rows stay on one line
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) \
            + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj: Any) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc


# -- market -----------------------------------------------------------------

def market_from_dict(raw: dict) -> tuple[ValidatedMarket, np.ndarray | None]:
    try:
        market = validate_market(raw)
    except KeyError as exc:
        raise ParseError(f"market file lacks key {exc}") from exc
    phi = validate_surplus(raw["phi"], market) if "phi" in raw else None
    return market, phi


def load_market(path) -> tuple[ValidatedMarket, np.ndarray | None]:
    return market_from_dict(read_json(path))


def market_to_dict(market: ValidatedMarket, phi=None) -> dict:
    out = {"x_types": list(market.types.x_types), "y_types": list(market.types.y_types),
           "n": market.n, "m": market.m}
    if phi is not None:
        out["phi"] = np.asarray(phi)
    return out


# -- matching CSV -----------------------------------------------------------

def write_matching_csv(path, matching: Matching, market: ValidatedMarket) -> None:
    xs, ys = market.types.x_types, market.types.y_types
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "mu"])
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                w.writerow([x, y, _fmt_float(float(matching.mu[i, j]))])
        for i, x in enumerate(xs):
            w.writerow([x, SINGLES_LABEL, _fmt_float(float(matching.mu_x0[i]))])
        for j, y in enumerate(ys):
            w.writerow([SINGLES_LABEL, y, _fmt_float(float(matching.mu_0y[j]))])


def read_matching_csv(path, market: ValidatedMarket) -> Matching:
    """Cells missing from the file are zero."""
    xi = {x: i for i, x in enumerate(market.types.x_types)}
    yi = {y: j for j, y in enumerate(market.types.y_types)}
    X, Y = market.shape
    mu, mu_x0, mu_0y = np.zeros((X, Y)), np.zeros(X), np.zeros(Y)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "y", "mu"]:
            raise ParseError(f"{path}: header must be x,y,mu")
        for lineno, row in enumerate(reader, start=2):
            x, y = row["x"].strip(), row["y"].strip()
            try:
                val = float(row["mu"])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: bad mass {row['mu']!r}") from exc
            if x == SINGLES_LABEL and y in yi:
                mu_0y[yi[y]] = val
            elif y == SINGLES_LABEL and x in xi:
                mu_x0[xi[x]] = val
            elif x in xi and y in yi:
                mu[xi[x], yi[y]] = val
            else:
                raise ParseError(f"{path}:{lineno}: unknown type pair ({x}, {y})")
    return Matching(mu, mu_x0, mu_0y)


# -- heterogeneity ------------------------------------------------------------

def write_draws(path, draws: np.ndarray) -> None:
    np.ascontiguousarray(draws, dtype="<f8").tofile(path)


def read_draws(path, n_columns: int, num_draws: int | None = None,
               n_types: int = 1) -> list[np.ndarray]:
    """Read S x n_columns blocks; a file holding n_types blocks gives one per type."""
    flat = np.fromfile(path, dtype="<f8")
    if flat.size % n_columns:
        raise ParseError(f"{path}: {flat.size} values do not fill rows of {n_columns}")
    rows = flat.reshape(-1, n_columns)
    if num_draws is None:
        return [rows]
    if rows.shape[0] == num_draws:
        return [rows]
    if rows.shape[0] == num_draws * n_types:
        return [rows[t * num_draws:(t + 1) * num_draws] for t in range(n_types)]
    raise ParseError(f"{path}: {rows.shape[0]} rows, expected {num_draws} "
                     f"or {num_draws * n_types}")


def heterogeneity_from_dict(raw: dict, side: str, n_types: int, n_choices: int,
                            base_dir: Path = Path(".")):
    kind = raw.get("kind")
    if kind == "logit":
        return Logit(float(raw.get("scale", 1.0)), side)
    if kind == "simulated":
        smoothing = float(raw.get("smoothing", 0.05))
        if "draws_file" in raw:
            path = Path(raw["draws_file"])
            if not path.is_absolute():
                path = base_dir / path
            blocks = read_draws(path, n_choices + 1, raw.get("num_draws"), n_types)
            return SimulatedSmoothed(tuple(blocks), smoothing, side)
        if "seed" not in raw or "num_draws" not in raw:
            raise ParseError("simulated heterogeneity needs draws_file or seed + num_draws")
        return simulated_from_seed(int(raw["seed"]), int(raw["num_draws"]), n_types,
                                   n_choices, side, smoothing,
                                   raw.get("distribution", "gumbel"),
                                   float(raw.get("scale", 1.0)))
    raise InvalidSpec(f"unknown heterogeneity kind {kind!r}")


def load_heterogeneity(arg: str, market: ValidatedMarket, side: str):
    """``arg`` is the literal ``logit`` (unit scale) or a heterogeneity JSON path."""
    X, Y = market.shape
    n_types, n_choices = (X, Y) if side == MEN else (Y, X)
    if arg == "logit":
        return Logit(1.0, side)
    path = Path(arg)
    raw = read_json(path)
    # a file may describe both sides at once: {"men": {...}, "women": {...}}
    if side in raw:
        raw = raw[side]
    return heterogeneity_from_dict(raw, side, n_types, n_choices, path.parent)


# -- equilibrium / shocks / basis -------------------------------------------

def equilibrium_to_dict(eq: EquilibriumResult) -> dict:
    return {"U": eq.U, "V": eq.V, "mu": eq.matching.mu, "mu_x0": eq.matching.mu_x0,
            "mu_0y": eq.matching.mu_0y, "u": eq.welfare.u, "v": eq.welfare.v,
            "diagnostics": dict(eq.diagnostics)}


def equilibrium_from_dict(raw: dict, market: ValidatedMarket) -> EquilibriumResult:
    try:
        U = np.atleast_2d(np.asarray(raw["U"], dtype=float))
        V = np.atleast_2d(np.asarray(raw["V"], dtype=float))
        mt = Matching(raw["mu"], raw["mu_x0"], raw["mu_0y"])
        welfare = WelfareVector(np.asarray(raw["u"], dtype=float),
                                np.asarray(raw["v"], dtype=float))
    except KeyError as exc:
        raise ParseError(f"equilibrium file lacks key {exc}") from exc
    if U.shape != market.shape or V.shape != market.shape or mt.shape != market.shape:
        raise DimensionMismatch("equilibrium does not fit the market")
    return EquilibriumResult(SplitUtilities(U, V), mt, welfare,
                             dict(raw.get("diagnostics", {})))


def shock_from_dict(raw: dict, market: ValidatedMarket) -> Shock:
    return Shock.build(market.shape, raw.get("dn"), raw.get("dm"), raw.get("dphi"))


def basis_from_dict(raw: dict) -> BasisFamily:
    try:
        entries = raw["basis"]
        names = tuple(e.get("name", f"phi{k + 1}") for k, e in enumerate(entries))
        mats = np.array([np.asarray(e["matrix"], dtype=float) for e in entries])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed basis file ({exc})") from exc
    return BasisFamily(mats, names)


def cs_report_to_dict(report: ComparativeStaticsReport) -> dict:
    out = {"dU": report.dU, "dV": report.dV, "du": report.du, "dv": report.dv,
           "dmu": report.dmu, "dmu_x0": report.dmu_x0, "dmu_0y": report.dmu_0y}
    if report.blocks is not None:
        out["blocks"] = report.blocks.as_dict()
    return out


def write_matrix_csv(path, matrix: np.ndarray, row_labels, col_labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + list(col_labels))
        for lab, row in zip(row_labels, np.atleast_2d(matrix)):
            w.writerow([lab] + [_fmt_float(float(v)) for v in row])
