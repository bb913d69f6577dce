"""Feature models with categorical and numeric features.

A model is a tree of features. Children hang off their parent either
individually (mandatory / optional) or as members of an XOR ("exactly one")
or OR ("at least one") group. A numeric feature owns one XOR group whose
members are value leaves; a value of 0 means the numeric feature is off and is
never part of a configuration. Cross-branch dependencies add constraints
between arbitrary features.

Configurations are plain frozensets of selected feature ids.
"""

from __future__ import annotations

import itertools
import json
import math
import operator
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple, Sequence

CATEGORICAL = "categorical"
NUMERIC = "numeric"
VALUE = "value"
FEATURE_KINDS = (CATEGORICAL, NUMERIC, VALUE)

MANDATORY = "mandatory"
OPTIONAL = "optional"
XOR = "xor"
OR = "or"
RELATIONS = (MANDATORY, OPTIONAL, XOR, OR)

REQUIRE = "require"
EXCLUDE = "exclude"
AT_LEAST_ONE_EXIST = "at_least_one_exist"
AT_LEAST_ONE_REQUIRE = "at_least_one_require"
RANGE_TO_RANGE = "range_to_range"
TO_RANGE = "to_range"
RANGE_TO = "range_to"
DEPENDENCY_KINDS = (
    REQUIRE,
    EXCLUDE,
    AT_LEAST_ONE_EXIST,
    AT_LEAST_ONE_REQUIRE,
    RANGE_TO_RANGE,
    TO_RANGE,
    RANGE_TO,
)

COMPARATORS: dict[str, Callable[[float, float], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
}

Configuration = frozenset  # frozenset[str] of selected feature ids


class ModelError(ValueError):
    """Base class for problems with a feature-model document."""


class ModelSyntaxError(ModelError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class SchemaError(ModelError):
    def __init__(self, message: str, feature: str | None = None):
        super().__init__(message if feature is None else f"{feature}: {message}")
        self.feature = feature


class DanglingReferenceError(ModelError):
    def __init__(self, message: str, reference: str):
        super().__init__(message)
        self.reference = reference


@dataclass(frozen=True)
class Feature:
    id: str
    name: str
    kind: str
    parent: str | None
    relation: str | None
    group: str | None = None
    numeric_value: float | None = None


@dataclass(frozen=True)
class Group:
    id: str
    owner: str
    kind: str
    members: tuple[str, ...]


@dataclass(frozen=True)
class Range:
    """Inclusive bounds over numeric values, minus explicit exclusions."""

    min: float | None = None
    max: float | None = None
    exclusions: tuple[float, ...] = ()

    def contains(self, v: float) -> bool:
        if self.min is not None and v < self.min:
            return False
        if self.max is not None and v > self.max:
            return False
        return v not in self.exclusions


@dataclass(frozen=True)
class Endpoint:
    """A dependency endpoint. ``value`` names a member of the feature's XOR group."""

    feature: str
    value: str | None = None

    @property
    def target(self) -> str:
        return self.value if self.value is not None else self.feature


@dataclass(frozen=True)
class CrossDependency:
    kind: str
    dependent: Endpoint
    main: Endpoint
    comparator: str | None = None
    range: Range | None = None
    or_group_root: str | None = None


@dataclass(frozen=True)
class Diagnostic:
    feature: str | None
    message: str

    def __str__(self) -> str:
        return self.message if self.feature is None else f"{self.feature}: {self.message}"


@dataclass(frozen=True, eq=False)
class FeatureModel:
    root: str
    features: Mapping[str, Feature]
    groups: Mapping[str, Group]
    cross_deps: tuple[CrossDependency, ...] = ()
    order: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.order:
            object.__setattr__(self, "order", tuple(self.features))

    # ---- structure -------------------------------------------------------
    @cached_property
    def children(self) -> dict[str, tuple[str, ...]]:
        kids: dict[str, list[str]] = {fid: [] for fid in self.order}
        for fid in self.order:
            p = self.features[fid].parent
            if p is not None and p in kids:
                kids[p].append(fid)
        return {k: tuple(v) for k, v in kids.items()}

    @cached_property
    def owned_groups(self) -> dict[str, tuple[Group, ...]]:
        out: dict[str, list[Group]] = {fid: [] for fid in self.order}
        for g in self.groups.values():
            if g.owner in out:
                out[g.owner].append(g)
        return {k: tuple(v) for k, v in out.items()}

    def xor_group(self, fid: str) -> Group | None:
        for g in self.owned_groups[fid]:
            if g.kind == XOR:
                return g
        return None

    def relation(self, fid: str) -> str | None:
        """Relation to the parent, treating the lone member of a group as mandatory."""
        f = self.features[fid]
        if f.relation in (XOR, OR) and len(self.groups[f.group].members) == 1:
            return MANDATORY
        return f.relation

    def is_deselectable(self, fid: str) -> bool:
        return self.relation(fid) in (OPTIONAL, XOR, OR)

    @cached_property
    def _ancestor_deselectable(self) -> dict[str, bool]:
        out: dict[str, bool] = {}
        for fid in self.preorder:
            p = self.features[fid].parent
            out[fid] = p is not None and (out[p] or self.is_deselectable(p))
        return out

    def is_conditionally_deselectable(self, fid: str) -> bool:
        return not self.is_deselectable(fid) and self._ancestor_deselectable[fid]

    def is_core(self, fid: str) -> bool:
        """Selected in every configuration (structurally)."""
        return not self.is_deselectable(fid) and not self._ancestor_deselectable[fid]

    @cached_property
    def preorder(self) -> tuple[str, ...]:
        out: list[str] = []
        stack = [self.root]
        while stack:
            fid = stack.pop()
            out.append(fid)
            stack.extend(reversed(self.children.get(fid, ())))
        return tuple(out)

    def ancestors(self, fid: str) -> list[str]:
        out = []
        p = self.features[fid].parent
        while p is not None:
            out.append(p)
            p = self.features[p].parent
        return out

    def is_zero_value(self, fid: str) -> bool:
        f = self.features[fid]
        return f.kind == VALUE and f.numeric_value == 0

    def numeric_value_of(self, config: frozenset, fid: str) -> float | None:
        """Selected value of numeric feature ``fid``, or None when it is off."""
        if fid not in config:
            return None
        for c in self.children[fid]:
            if c in config:
                return self.features[c].numeric_value
        return None

    def member_for_value(self, fid: str, value: float) -> str:
        for c in self.children[fid]:
            if self.features[c].numeric_value == value:
                return c
        raise SchemaError(f"no child with value {value}", fid)


# ---------------------------------------------------------------------------
# parsing and serialization


def _num(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise SchemaError(f"expected a finite number, got {x!r}", where)
    return float(x)


def _parse_range(doc, where: str) -> Range:
    if not isinstance(doc, dict):
        raise SchemaError("range must be an object", where)
    lo = doc.get("min")
    hi = doc.get("max")
    return Range(
        None if lo is None else _num(lo, where),
        None if hi is None else _num(hi, where),
        tuple(_num(v, where) for v in doc.get("exclusions", ())),
    )


def _parse_endpoint(doc, features: Mapping[str, Feature], groups, where: str) -> Endpoint:
    if not isinstance(doc, dict) or "feature" not in doc:
        raise SchemaError("endpoint needs a 'feature' key", where)
    fid = doc["feature"]
    if fid not in features:
        raise DanglingReferenceError(f"{where}: unknown feature {fid!r}", fid)
    value = doc.get("value")
    if value is None:
        return Endpoint(fid)
    f = features[fid]
    if f.kind == NUMERIC:
        v = _num(value, fid)
        for g in groups.values():
            if g.owner == fid:
                for m in g.members:
                    if features[m].numeric_value == v:
                        return Endpoint(fid, m)
        raise DanglingReferenceError(f"{where}: {fid} has no value {v}", fid)
    if value not in features or features[value].parent != fid:
        raise DanglingReferenceError(f"{where}: {value!r} is not a child of {fid}", str(value))
    return Endpoint(fid, value)


def model_from_dict(doc: Mapping) -> FeatureModel:
    """Build and validate a model from an already-decoded document."""
    if not isinstance(doc, Mapping):
        raise SchemaError("document must be a JSON object")
    for key in ("root", "features"):
        if key not in doc:
            raise SchemaError(f"missing top-level key {key!r}")
    features: dict[str, Feature] = {}
    for item in doc["features"]:
        if not isinstance(item, dict) or "id" not in item:
            raise SchemaError(f"feature entry without id: {item!r}")
        fid = str(item["id"])
        if fid in features:
            raise SchemaError("duplicate feature id", fid)
        kind = item.get("kind", CATEGORICAL)
        if kind not in FEATURE_KINDS:
            raise SchemaError(f"unknown kind {kind!r}", fid)
        rel = item.get("relation")
        if rel is not None and rel not in RELATIONS:
            raise SchemaError(f"unknown relation {rel!r}", fid)
        nv = item.get("numeric_value")
        if kind == VALUE:
            if nv is None:
                raise SchemaError("value feature needs numeric_value", fid)
            nv = _num(nv, fid)
        elif nv is not None:
            raise SchemaError("only value features carry numeric_value", fid)
        features[fid] = Feature(
            id=fid,
            name=str(item.get("name", fid)),
            kind=kind,
            parent=item.get("parent"),
            relation=rel,
            group=item.get("group"),
            numeric_value=nv,
        )
    groups: dict[str, Group] = {}
    for item in doc.get("groups", ()):
        gid = str(item["id"])
        if gid in groups:
            raise SchemaError(f"duplicate group id {gid!r}")
        groups[gid] = Group(gid, item["owner"], item["kind"], tuple(item.get("members", ())))

    root = doc["root"]
    if root not in features:
        raise DanglingReferenceError(f"root {root!r} is not a feature", root)
    for f in features.values():
        if f.parent is not None and f.parent not in features:
            raise DanglingReferenceError(f"{f.id}: unknown parent {f.parent!r}", f.parent)
        if f.group is not None and f.group not in groups:
            raise DanglingReferenceError(f"{f.id}: unknown group {f.group!r}", f.group)
    for g in groups.values():
        if g.owner not in features:
            raise DanglingReferenceError(f"group {g.id}: unknown owner {g.owner!r}", g.owner)
        for m in g.members:
            if m not in features:
                raise DanglingReferenceError(f"group {g.id}: unknown member {m!r}", m)

    deps = []
    for i, item in enumerate(doc.get("dependencies", ())):
        where = f"dependency[{i}]"
        kind = item.get("kind")
        if kind not in DEPENDENCY_KINDS:
            raise SchemaError(f"{where}: unknown kind {kind!r}")
        rng = item.get("range")
        root_id = item.get("or_group_root")
        if root_id is not None and root_id not in features:
            raise DanglingReferenceError(f"{where}: unknown or_group_root {root_id!r}", root_id)
        deps.append(
            CrossDependency(
                kind=kind,
                dependent=_parse_endpoint(item.get("dependent"), features, groups, where),
                main=_parse_endpoint(item.get("main"), features, groups, where),
                comparator=item.get("comparator"),
                range=None if rng is None else _parse_range(rng, where),
                or_group_root=root_id,
            )
        )
    model = FeatureModel(root, features, groups, tuple(deps), tuple(features))
    problems = validate_model(model)
    if problems:
        raise SchemaError("; ".join(map(str, problems)), problems[0].feature)
    return model


def parse_model(text: str) -> FeatureModel:
    """Parse a JSON feature-model document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelSyntaxError(e.msg, e.lineno, e.colno) from None
    return model_from_dict(doc)


def load_model(path) -> FeatureModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def _endpoint_doc(m: FeatureModel, ep: Endpoint) -> dict:
    out: dict = {"feature": ep.feature}
    if ep.value is not None:
        if m.features[ep.feature].kind == NUMERIC:
            out["value"] = m.features[ep.value].numeric_value
        else:
            out["value"] = ep.value
    return out


def model_to_dict(m: FeatureModel) -> dict:
    feats = []
    for fid in m.order:
        f = m.features[fid]
        item = {
            "id": f.id,
            "name": f.name,
            "kind": f.kind,
            "parent": f.parent,
            "relation": f.relation,
            "group": f.group,
        }
        if f.numeric_value is not None:
            item["numeric_value"] = f.numeric_value
        feats.append(item)
    deps = []
    for d in m.cross_deps:
        item = {
            "kind": d.kind,
            "dependent": _endpoint_doc(m, d.dependent),
            "main": _endpoint_doc(m, d.main),
        }
        if d.comparator is not None:
            item["comparator"] = d.comparator
        if d.range is not None:
            r: dict = {}
            if d.range.min is not None:
                r["min"] = d.range.min
            if d.range.max is not None:
                r["max"] = d.range.max
            if d.range.exclusions:
                r["exclusions"] = list(d.range.exclusions)
            item["range"] = r
        if d.or_group_root is not None:
            item["or_group_root"] = d.or_group_root
        deps.append(item)
    return {
        "root": m.root,
        "features": feats,
        "groups": [
            {"id": g.id, "owner": g.owner, "kind": g.kind, "members": list(g.members)}
            for g in m.groups.values()
        ],
        "dependencies": deps,
    }


def dump_model(m: FeatureModel, indent: int | None = 1) -> str:
    return json.dumps(model_to_dict(m), indent=indent)


# ---------------------------------------------------------------------------
# structural validation


def validate_model(m: FeatureModel) -> list[Diagnostic]:
    """Return one diagnostic per violated structural invariant."""
    out: list[Diagnostic] = []

    def bad(fid, msg):
        out.append(Diagnostic(fid, msg))

    if m.root not in m.features:
        return [Diagnostic(None, f"root {m.root!r} missing")]
    root = m.features[m.root]
    if root.parent is not None or root.relation is not None:
        bad(m.root, "root must have no parent and no relation")
    if root.kind != CATEGORICAL:
        bad(m.root, "root must be categorical")

    reachable = set(m.preorder)
    for fid in m.order:
        f = m.features[fid]
        if fid != m.root:
            if f.parent is None or f.parent not in m.features:
                bad(fid, "missing parent")
                continue
            if fid not in reachable:
                bad(fid, "not reachable from the root (cycle?)")
            if f.relation is None:
                bad(fid, "non-root feature needs a relation")
            elif f.relation in (XOR, OR):
                g = m.groups.get(f.group) if f.group else None
                if g is None:
                    bad(fid, f"{f.relation} member without a group")
                elif g.kind != f.relation or g.owner != f.parent or fid not in g.members:
                    bad(fid, f"inconsistent membership in group {g.id}")
            elif f.group is not None:
                bad(fid, f"{f.relation} feature must not name a group")
        kids = m.children[fid]
        if f.kind == VALUE:
            if kids:
                bad(fid, "value features must be leaves")
            parent = m.features.get(f.parent) if f.parent else None
            if parent is None or parent.kind != NUMERIC:
                bad(fid, "value feature outside a numeric feature")
        elif f.kind == NUMERIC:
            gs = m.owned_groups[fid]
            if len(gs) != 1 or gs[0].kind != XOR:
                bad(fid, "numeric feature needs exactly one XOR child group")
            elif len(gs[0].members) < 2:
                bad(fid, "numeric feature needs at least two values")
            for c in kids:
                if m.features[c].kind != VALUE:
                    bad(fid, f"numeric feature has non-value child {c}")
            vals = [m.features[c].numeric_value for c in kids]
            if len(set(vals)) != len(vals):
                bad(fid, "duplicate numeric values")
            if 0.0 in vals and fid in reachable and m.is_core(fid):
                bad(fid, "value 0 on a numeric feature that can never be off")
        else:
            for c in kids:
                if m.features[c].kind == VALUE:
                    bad(fid, f"value child {c} under a categorical feature")
        if sum(g.kind == XOR for g in m.owned_groups.get(fid, ())) > 1:
            bad(fid, "more than one XOR group on one feature")

    for g in m.groups.values():
        if g.kind not in (XOR, OR):
            bad(g.owner, f"group {g.id} has unknown kind {g.kind!r}")
        if not g.members:
            bad(g.owner, f"group {g.id} has no members")
        for mem in g.members:
            f = m.features.get(mem)
            if f is None or f.parent != g.owner or f.group != g.id:
                bad(mem, f"listed in group {g.id} but not attached to it")

    for i, d in enumerate(m.cross_deps):
        where = f"dependency[{i}]"
        fd = m.features.get(d.dependent.feature)
        fm = m.features.get(d.main.feature)
        if fd is None or fm is None:
            bad(None, f"{where}: dangling endpoint")
            continue
        for ep in (d.dependent, d.main):
            if m.is_zero_value(ep.target):
                bad(ep.target, f"{where}: a zero value cannot be an endpoint")
        if d.kind == RANGE_TO_RANGE:
            if fd.kind != NUMERIC or fm.kind != NUMERIC:
                bad(fd.id, f"{where}: range_to_range needs two numeric features")
            if d.comparator not in COMPARATORS:
                bad(fd.id, f"{where}: bad comparator {d.comparator!r}")
            if d.dependent.value or d.main.value:
                bad(fd.id, f"{where}: range_to_range takes no value qualifiers")
        elif d.kind == TO_RANGE:
            if fm.kind != NUMERIC or d.main.value is not None or d.range is None:
                bad(fd.id, f"{where}: to_range needs an unqualified numeric main and a range")
        elif d.kind == RANGE_TO:
            if fd.kind != NUMERIC or d.dependent.value is not None or d.range is None:
                bad(fd.id, f"{where}: range_to needs an unqualified numeric dependent and a range")
        elif d.kind in (AT_LEAST_ONE_EXIST, AT_LEAST_ONE_REQUIRE):
            if d.or_group_root is None or _or_group(m, d) is None:
                bad(fd.id, f"{where}: {d.kind} needs an or_group_root owning an OR group")
        if d.dependent.feature == d.main.feature and d.kind != RANGE_TO_RANGE:
            bad(fd.id, f"{where}: dependent and main coincide")
    return out


def _or_group(m: FeatureModel, d: CrossDependency) -> Group | None:
    groups = [g for g in m.owned_groups.get(d.or_group_root, ()) if g.kind == OR]
    for g in groups:
        if d.main.feature in g.members:
            return g
    return groups[0] if groups else None


# ---------------------------------------------------------------------------
# configuration semantics


def dependency_holds(m: FeatureModel, d: CrossDependency, config: frozenset) -> bool:
    dep_on = d.dependent.target in config
    main_on = d.main.target in config
    k = d.kind
    if k == REQUIRE:
        return not dep_on or main_on
    if k == EXCLUDE:
        return not (dep_on and main_on)
    if k in (AT_LEAST_ONE_REQUIRE, AT_LEAST_ONE_EXIST):
        g = _or_group(m, d)
        any_member = any(x in config for x in g.members)
        if k == AT_LEAST_ONE_REQUIRE:
            return not dep_on or any_member
        return g.owner not in config or any_member
    if k == RANGE_TO_RANGE:
        vi = m.numeric_value_of(config, d.dependent.feature)
        vj = m.numeric_value_of(config, d.main.feature)
        return vi is None or vj is None or COMPARATORS[d.comparator](vi, vj)
    if k == TO_RANGE:
        vj = m.numeric_value_of(config, d.main.feature)
        return not dep_on or vj is None or d.range.contains(vj)
    if k == RANGE_TO:
        vi = m.numeric_value_of(config, d.dependent.feature)
        return vi is None or not d.range.contains(vi) or main_on
    raise ValueError(f"unknown dependency kind {k!r}")


def is_valid_configuration(m: FeatureModel, config: Iterable[str]) -> bool:
    sel = config if isinstance(config, frozenset) else frozenset(config)
    for fid in sel:
        if fid not in m.features:
            raise KeyError(f"unknown feature {fid!r}")
    if m.root not in sel:
        return False
    feats = m.features
    for fid in sel:
        f = feats[fid]
        if f.parent is not None and f.parent not in sel:
            return False
        if f.kind == VALUE and f.numeric_value == 0:
            return False
        for c in m.children[fid]:
            if feats[c].relation == MANDATORY and c not in sel:
                return False
        for g in m.owned_groups[fid]:
            k = sum(x in sel for x in g.members)
            if (g.kind == XOR and k != 1) or (g.kind == OR and k < 1):
                return False
    return all(dependency_holds(m, d, sel) for d in m.cross_deps)


class Enumeration(NamedTuple):
    configs: list
    truncated: bool


def _product(parts: Sequence[Callable[[], Iterator[frozenset]]]) -> Iterator[frozenset]:
    if not parts:
        yield frozenset()
        return
    head, rest = parts[0], parts[1:]
    for a in head():
        for b in _product(rest):
            yield a | b


def _subtree(m: FeatureModel, fid: str) -> Iterator[frozenset]:
    """All tree-consistent selections of fid's subtree, given fid is selected."""
    parts: list[Callable[[], Iterator[frozenset]]] = []
    grouped = set()
    for g in m.owned_groups[fid]:
        grouped.update(g.members)
        members = [x for x in g.members if not m.is_zero_value(x)]
        if g.kind == XOR:
            parts.append(lambda members=members: itertools.chain.from_iterable(
                _subtree(m, x) for x in members))
        else:
            def or_part(members=members):
                for mask in range(1, 1 << len(members)):
                    chosen = [x for i, x in enumerate(members) if mask >> i & 1]
                    yield from _product([lambda x=x: _subtree(m, x) for x in chosen])
            parts.append(or_part)
    for c in m.children[fid]:
        if c in grouped:
            continue
        if m.features[c].relation == MANDATORY:
            parts.append(lambda c=c: _subtree(m, c))
        else:
            parts.append(lambda c=c: itertools.chain((frozenset(),), _subtree(m, c)))
    me = frozenset((fid,))
    for rest in _product(parts):
        yield me | rest


def enumerate_valid_configurations(m: FeatureModel, cap: int = 1_000_000) -> Enumeration:
    """Exhaustively list valid configurations (tree walk filtered by the full check)."""
    out = []
    for c in _subtree(m, m.root):
        if is_valid_configuration(m, c):
            if len(out) >= cap:
                return Enumeration(out, True)
            out.append(c)
    return Enumeration(out, False)
