"""Seeded generator of small random feature models for oracle testing.

Models mix all relation kinds, contain at least one numeric feature and at
least one cross-branch dependency. With ``fault_free=True`` only models are
returned in which every feature can be selected, no deselectable feature is
forced on, and at least one configuration exists.
"""

from __future__ import annotations

import random

from .feature_model import (
    CATEGORICAL,
    COMPARATORS,
    EXCLUDE,
    MANDATORY,
    NUMERIC,
    OPTIONAL,
    RANGE_TO,
    RANGE_TO_RANGE,
    REQUIRE,
    TO_RANGE,
    VALUE,
    XOR,
    FeatureModel,
    ModelError,
    enumerate_valid_configurations,
    model_from_dict,
)


class _Builder:
    def __init__(self, rnd: random.Random, max_features: int):
        self.rnd = rnd
        self.max = max_features
        self.features = [dict(id="r", name="r", kind=CATEGORICAL, parent=None, relation=None, group=None)]
        self.groups: list[dict] = []
        self.depth = {"r": 0}
        self.n = 0

    def new_id(self) -> str:
        self.n += 1
        return f"f{self.n}"

    def left(self) -> int:
        return self.max - len(self.features)

    def add(self, parent, relation, kind=CATEGORICAL, group=None, value=None) -> str:
        fid = self.new_id()
        item = dict(id=fid, name=fid, kind=kind, parent=parent, relation=relation, group=group)
        if value is not None:
            item["numeric_value"] = value
        self.features.append(item)
        self.depth[fid] = self.depth[parent] + 1
        return fid

    def parents(self):
        return [f["id"] for f in self.features if f["kind"] == CATEGORICAL and self.depth[f["id"]] < 3]

    def numeric(self, parent, relation, group=None) -> str | None:
        n_vals = self.rnd.randint(2, 3)
        if self.left() < n_vals + 1:
            return None
        fid = self.add(parent, relation, NUMERIC, group)
        gid = f"{fid}v"
        members = []
        values = sorted(self.rnd.sample([1, 2, 3, 4, 5], n_vals))
        for v in values:
            members.append(self.add(fid, XOR, VALUE, gid, float(v)))
        self.groups.append(dict(id=gid, owner=fid, kind=XOR, members=members))
        return fid

    def group(self, parent, kind) -> bool:
        size = self.rnd.randint(2, 3)
        if self.left() < size:
            return False
        gid = f"g{len(self.groups)}"
        members = []
        for _ in range(size):
            if self.left() >= 4 and self.rnd.random() < 0.15:
                members.append(self.numeric(parent, kind, gid))
            else:
                members.append(self.add(parent, kind, group=gid))
        self.groups.append(dict(id=gid, owner=parent, kind=kind, members=members))
        return True


def _ancestors(doc_features, fid):
    parent = {f["id"]: f["parent"] for f in doc_features}
    out = []
    p = parent[fid]
    while p is not None:
        out.append(p)
        p = parent[p]
    return out


def _try_model(rnd: random.Random, max_features: int, n_deps: int) -> FeatureModel | None:
    reserve = rnd.randint(0, 2)  # room for zero values added below
    b = _Builder(rnd, max_features - reserve)
    b.numeric(rnd.choice(b.parents()), rnd.choice([MANDATORY, OPTIONAL, OPTIONAL]))
    while b.left() > 0:
        parent = rnd.choice(b.parents())
        action = rnd.choices(["opt", "man", "xor", "or", "num"], [3, 2, 2, 2, 1])[0]
        if action == "opt":
            b.add(parent, OPTIONAL)
        elif action == "man":
            b.add(parent, MANDATORY)
        elif action in ("xor", "or"):
            if not b.group(parent, action):
                b.add(parent, OPTIONAL)
        else:
            if b.numeric(parent, rnd.choice([MANDATORY, OPTIONAL])) is None:
                b.add(parent, OPTIONAL)
    doc = dict(root="r", features=b.features, groups=b.groups, dependencies=[])
    try:
        base = model_from_dict(doc)
    except ModelError:
        return None
    # a zero value where the numeric feature can be off
    b.max = max_features
    for fid in base.preorder:
        f = base.features[fid]
        if f.kind == NUMERIC and not base.is_core(fid) and b.left() > 0 and rnd.random() < 0.4:
            gid = f"{fid}v"
            zid = f"{fid}z"
            b.features.append(dict(id=zid, name=zid, kind=VALUE, parent=fid, relation=XOR, group=gid,
                                   numeric_value=0.0))
            for g in b.groups:
                if g["id"] == gid:
                    g["members"].insert(0, zid)
    base = model_from_dict(doc)

    def eligible(fid):
        return fid != base.root and not base.is_core(fid) and not base.is_zero_value(fid)

    pool = [f for f in base.preorder if eligible(f)]
    numerics = [f for f in pool if base.features[f].kind == NUMERIC]
    if len(pool) < 2:
        return None

    def unrelated(a, c):
        if a == c or a in base.ancestors(c) or c in base.ancestors(a):
            return False
        fa, fc = base.features[a], base.features[c]
        return not (fa.parent == fc.parent and fa.group is not None and fa.group == fc.group
                    and base.groups[fa.group].kind == XOR)

    def endpoint(fid):
        f = base.features[fid]
        ep = {"feature": fid}
        if f.kind == NUMERIC and rnd.random() < 0.3:
            vals = [base.features[c].numeric_value for c in base.children[fid]
                    if base.features[c].numeric_value]
            ep["value"] = rnd.choice(vals)
        return ep

    def values_of(fid):
        return sorted(base.features[c].numeric_value for c in base.children[fid]
                      if base.features[c].numeric_value)

    def a_range(fid):
        vals = values_of(fid)
        cut = rnd.choice(vals)
        return {"max": cut} if rnd.random() < 0.5 else {"min": cut}

    deps = []
    for _ in range(n_deps):
        for _attempt in range(20):
            kind = rnd.choices([REQUIRE, EXCLUDE, RANGE_TO_RANGE, TO_RANGE, RANGE_TO], [4, 3, 2, 1, 1])[0]
            if kind == RANGE_TO_RANGE:
                if len(numerics) < 2:
                    continue
                a, c = rnd.sample(numerics, 2)
                if not unrelated(a, c):
                    continue
                deps.append(dict(kind=kind, dependent={"feature": a}, main={"feature": c},
                                 comparator=rnd.choice(list(COMPARATORS))))
            elif kind == TO_RANGE:
                if not numerics:
                    continue
                c = rnd.choice(numerics)
                a = rnd.choice(pool)
                if not unrelated(a, c) or base.features[a].kind == VALUE:
                    continue
                deps.append(dict(kind=kind, dependent={"feature": a}, main={"feature": c}, range=a_range(c)))
            elif kind == RANGE_TO:
                if not numerics:
                    continue
                a = rnd.choice(numerics)
                c = rnd.choice(pool)
                if not unrelated(a, c):
                    continue
                deps.append(dict(kind=kind, dependent={"feature": a}, main=endpoint(c) if
                                 base.features[c].kind != NUMERIC else {"feature": c}, range=a_range(a)))
            else:
                a, c = rnd.sample(pool, 2)
                if not unrelated(a, c):
                    continue
                deps.append(dict(kind=kind, dependent=endpoint(a), main=endpoint(c)))
            break
    if not deps:
        return None
    doc["dependencies"] = deps
    try:
        return model_from_dict(doc)
    except ModelError:
        return None


def has_faults(m: FeatureModel) -> bool:
    """Dead features, false-optional features, or no configuration at all."""
    configs, truncated = enumerate_valid_configurations(m, cap=200_000)
    if truncated or not configs:
        return True
    seen = set().union(*configs)
    for fid in m.preorder:
        if m.is_zero_value(fid):
            continue
        if fid not in seen:
            return True
        if m.is_deselectable(fid):
            parent = m.features[fid].parent
            if all(fid in c for c in configs if parent in c):
                return True
    return False


def random_model(
    seed: int | random.Random,
    max_features: int = 12,
    n_deps: int | None = None,
    fault_free: bool = False,
    max_tries: int = 1000,
) -> FeatureModel:
    rnd = seed if isinstance(seed, random.Random) else random.Random(seed)
    for _ in range(max_tries):
        k = n_deps if n_deps is not None else rnd.randint(1, 2)
        m = _try_model(rnd, max_features, k)
        if m is None:
            continue
        if fault_free and has_faults(m):
            continue
        return m
    raise RuntimeError("could not generate a model")
