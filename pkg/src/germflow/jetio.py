"""Canonical JSON documents for map jets.

Schema::

    {"n": 2, "degree": 8, "vars": ["x", "y"],
     "components": [[{"alpha": [1, 0], "re": ..., "im": ...}, ...], ...]}

Coefficients are listed in graded-lex order, numbers are printed with 17
significant digits and near-zero coefficients are omitted, so equal inputs
always produce byte-identical text.
"""

from __future__ import annotations

import json
import math
from typing import Sequence

from .jet_core import DEFAULT_TOLERANCES, MapJet, ToleranceProfile


class JetDocumentError(ValueError):
    pass


def _num(x: float) -> str:
    if not math.isfinite(x):
        raise JetDocumentError(f"cannot serialize non-finite coefficient {x}")
    if x == 0:
        return "0"
    return format(x, ".17g")


def dump_jet(
    f: MapJet, tol: ToleranceProfile = DEFAULT_TOLERANCES, variables: Sequence[str] | None = None
) -> str:
    lines = ["{", f'  "n": {f.n},', f'  "degree": {f.D},']
    if variables is not None:
        lines.append(f'  "vars": {json.dumps(list(variables))},')
    lines.append('  "components": [')
    comps = []
    for comp in f:
        recs = [
            f'      {{"alpha": [{", ".join(str(e) for e in alpha)}], "re": {_num(c.real)}, "im": {_num(c.imag)}}}'
            for alpha, c in comp.items()
            if not tol.is_zero(c)
        ]
        comps.append("    [\n" + ",\n".join(recs) + "\n    ]" if recs else "    []")
    lines.append(",\n".join(comps))
    lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def load_jet(text: str) -> MapJet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JetDocumentError(f"not valid JSON: {exc}") from None
    try:
        n = int(doc["n"])
        D = int(doc["degree"])
        comps = doc["components"]
    except (KeyError, TypeError, ValueError) as exc:
        raise JetDocumentError(f"missing or malformed field: {exc}") from None
    if not isinstance(comps, list) or len(comps) != n:
        raise JetDocumentError(f"expected {n} components")
    polys = []
    for comp in comps:
        poly = {}
        for rec in comp:
            alpha = tuple(int(e) for e in rec["alpha"])
            if len(alpha) != n or min(alpha, default=0) < 0:
                raise JetDocumentError(f"bad exponent list {rec['alpha']}")
            if sum(alpha) > D:
                raise JetDocumentError(f"exponent {list(alpha)} exceeds degree {D}")
            poly[alpha] = poly.get(alpha, 0) + complex(float(rec.get("re", 0)), float(rec.get("im", 0)))
        polys.append(poly)
    return MapJet.from_dicts(n, D, polys)
