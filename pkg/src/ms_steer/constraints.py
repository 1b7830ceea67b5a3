"""Restraint types derived from XL-MS / HDX-MS data and their JSON file format."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Union

from .structure import ResidueRef

FORMAT = "ms-steer/constraints/1"

# lower bound for a missing cross-link when no linker length is known
DEFAULT_NEGATIVE_DMIN = 30.0


class ConstraintFormatError(ValueError):
    """Schema violation; message carries the JSON path of the bad field."""


@dataclass(frozen=True)
class XlPositive:
    i: ResidueRef
    j: ResidueRef
    d_min: float
    d_max: float

    def __post_init__(self):
        if not (0.0 <= self.d_min <= self.d_max) or self.d_max <= 0.0:
            raise ValueError(f"need 0 <= d_min <= d_max and d_max > 0, got {self.d_min}, {self.d_max}")

    @property
    def pair(self):
        return tuple(sorted((self.i, self.j)))


@dataclass(frozen=True)
class XlNegative:
    i: ResidueRef
    j: ResidueRef
    d_min: float = DEFAULT_NEGATIVE_DMIN

    def __post_init__(self):
        if self.d_min <= 0.0:
            raise ValueError(f"d_min must be > 0, got {self.d_min}")

    @property
    def pair(self):
        return tuple(sorted((self.i, self.j)))


@dataclass(frozen=True)
class HdxProxy:
    residue: ResidueRef
    partner_chain: str
    delta: float

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


@dataclass(frozen=True)
class HdxBurial:
    residue: ResidueRef
    delta: float

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


Constraint = Union[XlPositive, XlNegative, HdxProxy, HdxBurial]

KINDS = {
    "xl_positive": XlPositive,
    "xl_negative": XlNegative,
    "hdx_proxy": HdxProxy,
    "hdx_burial": HdxBurial,
}
KIND_OF = {v: k for k, v in KINDS.items()}
FAMILIES = ("xl_pos", "xl_neg", "hdx_proxy", "hdx_burial")
FAMILY_OF = dict(zip((XlPositive, XlNegative, HdxProxy, HdxBurial), FAMILIES))


@dataclass
class ConstraintSet:
    constraints: list = field(default_factory=list)
    # optional free-form per-constraint labels (e.g. "planted" / "false")
    provenance: list | None = None

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def __getitem__(self, k):
        return self.constraints[k]

    def of(self, cls) -> list:
        return [c for c in self.constraints if isinstance(c, cls)]

    def subset(self, indices) -> "ConstraintSet":
        idx = sorted(indices)
        prov = [self.provenance[k] for k in idx] if self.provenance is not None else None
        return ConstraintSet([self.constraints[k] for k in idx], prov)

    def families(self) -> dict[str, int]:
        out = dict.fromkeys(FAMILIES, 0)
        for c in self.constraints:
            out[FAMILY_OF[type(c)]] += 1
        return out

    def __add__(self, other: "ConstraintSet") -> "ConstraintSet":
        prov = None
        if self.provenance is not None or other.provenance is not None:
            prov = (self.provenance or [None] * len(self)) + (other.provenance or [None] * len(other))
        return ConstraintSet(self.constraints + other.constraints, prov)


# -- JSON ---------------------------------------------------------------------

def _ref_json(r: ResidueRef) -> dict:
    return {"chain": r.chain_id, "seq": r.seq_number}


def constraint_to_json(c: Constraint) -> dict:
    out = {"kind": KIND_OF[type(c)]}
    for k, v in asdict(c).items():
        out[k] = _ref_json(getattr(c, k)) if isinstance(getattr(c, k), ResidueRef) else v
    return out


def to_json(cs: ConstraintSet, **meta) -> dict:
    doc = {"format": FORMAT, "constraints": [constraint_to_json(c) for c in cs]}
    if meta:
        doc["meta"] = meta
    return doc


def dumps(cs: ConstraintSet, **meta) -> str:
    return json.dumps(to_json(cs, **meta), indent=2, sort_keys=False) + "\n"


def _parse_ref(obj, path: str) -> ResidueRef:
    if not isinstance(obj, dict) or set(obj) != {"chain", "seq"}:
        raise ConstraintFormatError(f"{path}: expected {{'chain', 'seq'}} object")
    if not isinstance(obj["chain"], str) or not isinstance(obj["seq"], int) or isinstance(obj["seq"], bool):
        raise ConstraintFormatError(f"{path}: chain must be a string and seq an integer")
    return ResidueRef(obj["chain"], obj["seq"])


_FIELDS = {
    "xl_positive": {"i": "ref", "j": "ref", "d_min": "num", "d_max": "num"},
    "xl_negative": {"i": "ref", "j": "ref", "d_min": "num"},
    "hdx_proxy": {"residue": "ref", "partner_chain": "str", "delta": "num"},
    "hdx_burial": {"residue": "ref", "delta": "num"},
}


def constraint_from_json(obj, path: str = "constraints[?]") -> Constraint:
    if not isinstance(obj, dict):
        raise ConstraintFormatError(f"{path}: expected object")
    kind = obj.get("kind")
    if kind not in _FIELDS:
        raise ConstraintFormatError(f"{path}.kind: unknown constraint kind {kind!r}")
    spec = _FIELDS[kind]
    extra = set(obj) - set(spec) - {"kind"}
    if extra:
        raise ConstraintFormatError(f"{path}: unknown field(s) {sorted(extra)}")
    kwargs = {}
    for name, typ in spec.items():
        if name not in obj:
            raise ConstraintFormatError(f"{path}.{name}: missing")
        v = obj[name]
        if typ == "ref":
            kwargs[name] = _parse_ref(v, f"{path}.{name}")
        elif typ == "num":
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConstraintFormatError(f"{path}.{name}: expected number")
            kwargs[name] = float(v)
        else:
            if not isinstance(v, str):
                raise ConstraintFormatError(f"{path}.{name}: expected string")
            kwargs[name] = v
    try:
        return KINDS[kind](**kwargs)
    except ValueError as e:
        raise ConstraintFormatError(f"{path}: {e}") from None


def from_json(doc) -> ConstraintSet:
    if not isinstance(doc, dict):
        raise ConstraintFormatError("$: expected object")
    if doc.get("format") != FORMAT:
        raise ConstraintFormatError(f"$.format: expected {FORMAT!r}, got {doc.get('format')!r}")
    items = doc.get("constraints")
    if not isinstance(items, list):
        raise ConstraintFormatError("$.constraints: expected array")
    return ConstraintSet([constraint_from_json(o, f"$.constraints[{k}]") for k, o in enumerate(items)])


def loads(text: str) -> ConstraintSet:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConstraintFormatError(f"$: invalid JSON ({e})") from None
    return from_json(doc)


def load(path) -> ConstraintSet:
    with open(path) as fh:
        return loads(fh.read())


def save(cs: ConstraintSet, path, **meta) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(cs, **meta))
