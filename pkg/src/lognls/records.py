"""Time-stamped diagnostic records and their CSV layout."""

import csv
import math
from dataclasses import asdict, dataclass, field

__all__ = ["DiagnosticsRecord", "write_records_csv", "read_csv_columns"]


@dataclass
class DiagnosticsRecord:
    """Scalars recorded at one snapshot.

    Solver runs fill the conserved quantities; the rescaled-profile
    diagnostics fill the rest.  Unset entries are ``None``.
    """

    t: float
    mass: float = None
    momentum: tuple = None
    energy: float = None
    energy_reg: float = None
    s: float = None
    E_kin: float = None
    E_ent: float = None
    pseudo_E: float = None
    m0: float = None
    m1: tuple = None
    m2: float = None
    I1: tuple = None
    I2: tuple = None
    W2: float = None
    sobolev: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _columns(records):
    d = len(next((r.momentum for r in records if r.momentum is not None), ()) or
            next((r.m1 for r in records if r.m1 is not None), ()) or (0,))
    cols = ["t", "s", "mass"]
    cols += [f"J{j}" for j in range(d)]
    cols += ["E", "E_reg", "E_kin", "E_ent", "pseudo_E", "m0"]
    cols += [f"m1_{j}" for j in range(d)]
    cols += ["m2"]
    cols += [f"I1_{j}" for j in range(d)] + [f"I2_{j}" for j in range(d)]
    cols += ["W2"]
    exps = sorted({e for r in records for e in r.sobolev})
    cols += [f"Hs_{e:g}" for e in exps]
    return cols, d, exps


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{float(x):.17g}"


def write_records_csv(fh, records):
    """Fixed column order: t, s, mass, J*, E, E_reg, E_kin, E_ent, pseudo_E,
    m0, m1_*, m2, I1_*, I2_*, W2, Hs_* (one per Sobolev exponent)."""
    cols, d, exps = _columns(records)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)

    def vec(v):
        return [None] * d if v is None else list(v)

    for r in records:
        row = [r.t, r.s, r.mass, *vec(r.momentum), r.energy, r.energy_reg, r.E_kin,
               r.E_ent, r.pseudo_E, r.m0, *vec(r.m1), r.m2, *vec(r.I1), *vec(r.I2), r.W2]
        row += [r.sobolev.get(e) for e in exps]
        w.writerow([_fmt(x) for x in row])


def read_csv_columns(path):
    """Read a numeric CSV into ``{column: list of float}``; blanks become nan."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return {}
    header, body = rows[0], rows[1:]
    out = {h: [] for h in header}
    for row in body:
        for h, v in zip(header, row):
            out[h].append(float(v) if v not in ("",) else float("nan"))
    return out
