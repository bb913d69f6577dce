"""Gene-level dependencies and their value trees.

Three extractors turn the grown tree and the model's cross-branch
dependencies into constraints between genes:

* vertical analysis (``VA-1``..``VA-3``) links genes on one root-to-leaf path,
* horizontal refactoring (``HR-2``, ``HR-3``) links genes hanging off a shared
  non-gene deselectable ancestor,
* cross-branch refactoring (``CR``) rewrites model dependencies whose
  endpoints are not genes.

All constraints on one dependent gene are then merged into a decision table
mapping the values of its main genes to the set of values it may take.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .feature_model import (
    AT_LEAST_ONE_EXIST,
    AT_LEAST_ONE_REQUIRE,
    COMPARATORS,
    EXCLUDE,
    MANDATORY,
    OR,
    RANGE_TO,
    RANGE_TO_RANGE,
    REQUIRE,
    TO_RANGE,
    CrossDependency,
    Endpoint,
    FeatureModel,
    Range,
    _or_group,
)
from .transposition import ChromosomeSpec, GrownModel, grow_model, identify_genes

OTHERWISE = -1
STRUCTURAL_ORIGINS = ("VA-1", "VA-2", "VA-3", "HR-2", "HR-3")


class ModelFaultError(ValueError):
    """The model contains a constraint the chromosome cannot express (a modelling fault)."""


@dataclass(frozen=True)
class GeneDependency:
    kind: str
    dependent: int
    main: int
    dependent_value: int | None = None
    main_value: int | None = None
    comparator: str | None = None
    range: Range | None = None
    or_group_root: str | None = None
    origin: str = field(default="CR", compare=False)

    @property
    def structural(self) -> bool:
        return self.origin in STRUCTURAL_ORIGINS

    def describe(self, spec: ChromosomeSpec) -> str:
        def side(g, v):
            gs = spec.genes[g]
            return gs.source_feature if v is None else f"{gs.source_feature}={gs.options[v].label}"

        extra = ""
        if self.comparator:
            extra = f" ({self.comparator})"
        if self.range is not None:
            extra = f" {self.range}"
        return (
            f"{side(self.dependent, self.dependent_value)} {self.kind}{extra} "
            f"{side(self.main, self.main_value)}"
        )

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "dependent": self.dependent,
            "main": self.main,
            "origin": self.origin,
        }
        for key in ("dependent_value", "main_value", "comparator", "or_group_root"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.range is not None:
            out["range"] = {
                "min": self.range.min,
                "max": self.range.max,
                "exclusions": list(self.range.exclusions),
            }
        return out


# ---------------------------------------------------------------------------
# helpers on the grown tree


class _Tree:
    def __init__(self, g: GrownModel, spec: ChromosomeSpec):
        self.g = g
        self.m = g.base
        self.spec = spec
        self.gene = spec.gene_of

    def option_index(self, parent: str, member: str) -> int:
        for i, o in enumerate(self.g.options[parent]):
            if o.feature == member:
                return i
        raise KeyError(member)

    def cdg(self, fid: str) -> tuple[str, ...]:
        return self.g.closest_gene_descendants[fid]

    def closest_deselectable_ancestor(self, fid: str) -> str | None:
        for a in self.m.ancestors(fid):
            if self.m.is_deselectable(a):
                return a
        return None

    def between(self, top: str, fid: str) -> list[str]:
        """Features strictly between ``top`` and its descendant ``fid``."""
        out = []
        p = self.m.features[fid].parent
        while p != top:
            out.append(p)
            p = self.m.features[p].parent
        return out

    def mandatory_chain(self, top: str, d: str) -> bool:
        """d is Mandatory and nothing between top and d is deselectable."""
        return self.m.relation(d) == MANDATORY and not any(
            self.m.is_deselectable(x) for x in self.between(top, d)
        )

    def carriers(self, fid: str) -> tuple[str, ...]:
        return (fid,) if fid in self.gene else self.cdg(fid)

    def or_groups(self):
        for gr in self.m.groups.values():
            if gr.kind == OR and len(gr.members) > 1:
                yield gr

    def aloe_guard(self, gr) -> bool:
        """True when the OR group's root is on whenever its closest deselectable ancestor is."""
        r = gr.owner
        a = r if self.m.is_deselectable(r) else self.closest_deselectable_ancestor(r)
        if a is None:
            return True  # the root of the group is never deselected
        chain = [r] + (self.between(a, r) if r != a else [])
        if r != a:
            chain.append(a)
        if any(x in self.gene for x in chain):
            return True
        if self.g.is_xor_member(a):
            return True
        return any(self.mandatory_chain(a, d) for d in self.cdg(a))


def _dedupe(deps: Iterable[GeneDependency]) -> list[GeneDependency]:
    seen = set()
    out = []
    for d in deps:
        if d not in seen:
            seen.add(d)
            out.append(d)
    return out


def extract_vertical(g: GrownModel, spec: ChromosomeSpec) -> list[GeneDependency]:
    t = _Tree(g, spec)
    m = t.m
    out: list[GeneDependency] = []
    gene = t.gene
    for fid in m.preorder:
        if fid == m.root:
            continue
        # VA-1
        if fid in gene and not m.is_core(fid):
            for d in t.cdg(fid):
                out.append(GeneDependency(REQUIRE, gene[d], gene[fid], origin="VA-1"))
                if t.mandatory_chain(fid, d):
                    out.append(GeneDependency(REQUIRE, gene[fid], gene[d], origin="VA-1"))
        # VA-2
        if g.is_xor_member(fid):
            p = m.features[fid].parent
            alpha = t.option_index(p, fid)
            if fid in gene:
                out.append(GeneDependency(REQUIRE, gene[fid], gene[p], main_value=alpha, origin="VA-2"))
                out.append(GeneDependency(REQUIRE, gene[p], gene[fid], dependent_value=alpha, origin="VA-2"))
            else:
                for d in t.cdg(fid):
                    out.append(GeneDependency(REQUIRE, gene[d], gene[p], main_value=alpha, origin="VA-2"))
                    if t.mandatory_chain(fid, d):
                        out.append(
                            GeneDependency(REQUIRE, gene[p], gene[d], dependent_value=alpha, origin="VA-2")
                        )
    # VA-3
    for gr in t.or_groups():
        if not t.aloe_guard(gr):
            continue
        carriers = list(dict.fromkeys(c for x in gr.members for c in t.carriers(x)))
        for a, b in itertools.permutations(carriers, 2):
            out.append(
                GeneDependency(AT_LEAST_ONE_EXIST, gene[a], gene[b], or_group_root=gr.id, origin="VA-3")
            )
    return _dedupe(out)


def extract_horizontal(g: GrownModel, spec: ChromosomeSpec) -> list[GeneDependency]:
    t = _Tree(g, spec)
    m = t.m
    gene = t.gene
    out: list[GeneDependency] = []
    done_groups = set()
    for fid in m.preorder:
        if fid == m.root:
            continue
        a = t.closest_deselectable_ancestor(fid)
        if a is None or a in gene or any(x in gene for x in t.between(a, fid)):
            continue
        rel = m.relation(fid)
        if rel == MANDATORY and fid in gene:  # HR-2
            for d in t.cdg(a):
                if d != fid:
                    out.append(GeneDependency(REQUIRE, gene[d], gene[fid], origin="HR-2"))
        elif rel == OR:  # HR-3
            gr = m.groups[m.features[fid].group]
            if gr.id in done_groups or t.aloe_guard(gr):
                continue
            done_groups.add(gr.id)
            inside = set()
            for x in gr.members:
                inside.update(_subtree(m, x))
            carriers = [c for x in gr.members for c in t.carriers(x)]
            for d in t.cdg(a):
                if d in inside:
                    continue
                for c in carriers:
                    out.append(
                        GeneDependency(AT_LEAST_ONE_REQUIRE, gene[d], gene[c], or_group_root=gr.id, origin="HR-3")
                    )
        # HR-1 (optional) and HR-4 (XOR member) emit nothing.
    return _dedupe(out)


def _subtree(m: FeatureModel, fid: str) -> list[str]:
    out = [fid]
    for c in m.children[fid]:
        out.extend(_subtree(m, c))
    return out


def _resolve(t: _Tree, ep: Endpoint) -> tuple[list[tuple[int, int | None]], bool]:
    """Gene carriers of an endpoint and whether the endpoint spans several of them."""
    m = t.m
    gene = t.gene
    if ep.value is not None:
        if ep.feature in gene:
            return [(gene[ep.feature], t.option_index(ep.feature, ep.value))], False
        return _resolve(t, Endpoint(ep.value))
    f = ep.feature
    if f in gene:
        return [(gene[f], None)], False
    if t.g.is_xor_member(f):
        p = m.features[f].parent
        return [(gene[p], t.option_index(p, f))], False
    if m.is_core(f):
        raise ModelFaultError(f"{f} is always selected, so a dependency on it is a modelling fault")
    cs = t.cdg(f)
    if not cs:
        raise ModelFaultError(f"{f} has no gene below it")
    return [(gene[c], None) for c in cs], True


def refactor_cross_branch(
    g: GrownModel, spec: ChromosomeSpec, deps: Sequence[CrossDependency]
) -> list[GeneDependency]:
    t = _Tree(g, spec)
    m = t.m
    out: list[GeneDependency] = []
    for i, dep in enumerate(deps):
        k = dep.kind
        if k == AT_LEAST_ONE_EXIST:
            continue  # same meaning as the OR group itself, already in the tree
        ds, _ = _resolve(t, dep.dependent)
        if k == AT_LEAST_ONE_REQUIRE:
            gr = _or_group(m, dep)
            ms = [(t.gene[c], None) for x in gr.members for c in t.carriers(x)]
            multi = True
        else:
            ms, multi = _resolve(t, dep.main)
        for d, dv in ds:
            if k == REQUIRE or k == AT_LEAST_ONE_REQUIRE:
                if multi:
                    if any(mg == d for mg, _ in ms):
                        continue  # the dependent itself is one of the carriers
                    tag = f"cr{i}:{d}:{dv}"
                    for mg, mv in ms:
                        out.append(GeneDependency(AT_LEAST_ONE_REQUIRE, d, mg, dv, mv, or_group_root=tag))
                else:
                    out.append(_self_check(GeneDependency(REQUIRE, d, ms[0][0], dv, ms[0][1]), spec))
            elif k == EXCLUDE:
                for mg, mv in ms:
                    out.append(_self_check(GeneDependency(EXCLUDE, d, mg, dv, mv), spec))
            elif k == RANGE_TO_RANGE:
                out.append(_self_check(
                    GeneDependency(RANGE_TO_RANGE, d, ms[0][0], comparator=dep.comparator), spec))
            elif k == TO_RANGE:
                out.append(_self_check(GeneDependency(TO_RANGE, d, ms[0][0], dv, range=dep.range), spec))
            elif k == RANGE_TO:
                if not multi:
                    out.append(_self_check(
                        GeneDependency(RANGE_TO, d, ms[0][0], main_value=ms[0][1], range=dep.range), spec))
                    continue
                gs = spec.genes[d]
                for v, o in enumerate(gs.options):
                    if o.is_off or not dep.range.contains(o.value):
                        continue
                    if any(mg == d for mg, _ in ms):
                        continue
                    tag = f"cr{i}:{d}:{v}"
                    for mg, mv in ms:
                        out.append(GeneDependency(AT_LEAST_ONE_REQUIRE, d, mg, v, mv, or_group_root=tag))
    return _dedupe(x for x in out if x is not None)


def _self_check(d: GeneDependency, spec: ChromosomeSpec) -> GeneDependency | None:
    if d.dependent != d.main:
        return d
    gs = spec.genes[d.dependent]
    a, b = d.dependent_value, d.main_value
    if d.kind == REQUIRE and (b is None or a == b):
        if a is None or not gs.options[a].is_off:
            return None  # "on requires on"
    if d.kind == EXCLUDE and a is not None and b is not None and a != b:
        return None  # one gene never takes two values
    raise ModelFaultError(f"dependency of a gene on itself: {d.describe(spec)}")


# ---------------------------------------------------------------------------
# merging into value trees


def _leaf(dep: GeneDependency, v: int, spec: ChromosomeSpec) -> frozenset:
    gi = spec.genes[dep.dependent]
    gj = spec.genes[dep.main]
    full = frozenset(range(len(gi.options)))
    off = frozenset({gi.off_index}) if gi.off_index is not None else frozenset()
    a = dep.dependent_value
    blocked = off if a is None else full - {a}
    ov = gj.options[v]
    main_on = (not ov.is_off) if dep.main_value is None else v == dep.main_value
    k = dep.kind
    if k in (REQUIRE, AT_LEAST_ONE_REQUIRE):
        return full if main_on else blocked
    if k == EXCLUDE:
        return blocked if main_on else full
    if k == AT_LEAST_ONE_EXIST:
        return full if main_on else full - off
    if k == RANGE_TO_RANGE:
        if ov.is_off:
            return full
        cmp = COMPARATORS[dep.comparator]
        return frozenset(x for x in full if gi.options[x].is_off or cmp(gi.options[x].value, ov.value))
    if k == TO_RANGE:
        return full if ov.is_off or dep.range.contains(ov.value) else blocked
    if k == RANGE_TO:
        if main_on:
            return full
        return frozenset(
            x for x in full if gi.options[x].is_off or not dep.range.contains(gi.options[x].value)
        )
    raise ValueError(f"unknown kind {k!r}")


@dataclass(frozen=True, eq=False)
class ValueTree:
    """Decision table: one key per main gene (a specific value or OTHERWISE)."""

    dependent_gene: int
    level_order: tuple[int, ...]
    level_keys: tuple[tuple[int, ...], ...]  # distinguished option indices per level
    table: Mapping[tuple[int, ...], frozenset]
    full: frozenset

    @cached_property
    def _lookup(self):
        # per level: (main gene, flat offset for each of its option indices); OTHERWISE is the last slot
        sizes = [len(k) + 1 for k in self.level_keys]
        strides = []
        s = 1
        for n in reversed(sizes):
            strides.append(s)
            s *= n
        strides.reverse()
        levels = []
        for g, keys, stride in zip(self.level_order, self.level_keys, strides):
            n_opts = max(keys) + 1 if keys else 0
            pos = {v: i for i, v in enumerate(keys)}
            offsets = [pos.get(v, len(keys)) * stride for v in range(n_opts)]
            levels.append((g, offsets, len(keys) * stride))
        flat: list = [None] * s
        for path, leaf in self.table.items():
            idx = 0
            for lvl, key in enumerate(path):
                k = len(self.level_keys[lvl]) if key == OTHERWISE else self.level_keys[lvl].index(key)
                idx += k * strides[lvl]
            flat[idx] = leaf
        return tuple(levels), flat

    def allowed(self, assignment: Sequence[int]) -> frozenset:
        if not self.level_order:
            return self.full
        levels, flat = self._lookup
        idx = 0
        for g, offsets, other in levels:
            v = assignment[g]
            idx += offsets[v] if 0 <= v < len(offsets) else other
        return flat[idx]

    def to_dict(self) -> dict:
        rows = []
        for path in sorted(self.table):
            rows.append({"when": list(path), "allowed": sorted(self.table[path])})
        return {
            "dependent_gene": self.dependent_gene,
            "level_order": list(self.level_order),
            "level_keys": [list(k) for k in self.level_keys],
            "otherwise": OTHERWISE,
            "rows": rows,
        }


def allowed_values(tree: ValueTree, context: Sequence[int] | Mapping[int, int]) -> frozenset:
    if isinstance(context, Mapping):
        missing = [g for g in tree.level_order if g not in context]
        if missing:
            raise KeyError(f"context lacks main genes {missing}")
        return tree.allowed(_MapView(context))
    return tree.allowed(context)


class _MapView:
    def __init__(self, mp):
        self.mp = mp

    def __getitem__(self, k):
        return self.mp[k]


def _combine(rows: Sequence[GeneDependency], values: Mapping[int, int], spec, full) -> frozenset:
    """Union within same-tag AtLeastOne* groups, then intersect everything."""
    groups: dict = {}
    for r in rows:
        if r.kind in (AT_LEAST_ONE_REQUIRE, AT_LEAST_ONE_EXIST) and r.or_group_root is not None:
            key = (r.kind, r.or_group_root)
        else:
            key = id(r)
        groups.setdefault(key, []).append(_leaf(r, values[r.main], spec))
    acc = full
    for leaves in groups.values():
        u = frozenset().union(*leaves)
        acc = acc & u
    return acc


def _merge_one(gene: int, rows: Sequence[GeneDependency], spec: ChromosomeSpec) -> ValueTree:
    gs = spec.genes[gene]
    full = frozenset(range(len(gs.options)))
    if not rows:
        return ValueTree(gene, (), (), {(): full}, full)
    mains = sorted({r.main for r in rows})
    levels = []
    keys = []
    for j in mains:
        mine = [r for r in rows if r.main == j]
        classes: dict = {}
        for v in range(len(spec.genes[j].options)):
            sig = tuple(_leaf(r, v, spec) for r in mine)
            classes.setdefault(sig, []).append(v)
        if len(classes) == 1:
            continue
        members = list(classes.values())
        biggest = max(range(len(members)), key=lambda i: (len(members[i]), -i))
        distinguished = sorted(v for i, vs in enumerate(members) if i != biggest for v in vs)
        levels.append(j)
        keys.append(tuple(distinguished))
    level_set = set(levels)
    rep_other = {}
    for j, ks in zip(levels, keys):
        rest = [v for v in range(len(spec.genes[j].options)) if v not in ks]
        rep_other[j] = rest[0]
    base_values = {j: 0 for j in mains if j not in level_set}
    structural = [r for r in rows if r.structural and r.kind != AT_LEAST_ONE_EXIST]
    off = frozenset({gs.off_index}) if gs.off_index is not None else None
    table = {}
    for path in itertools.product(*[ks + (OTHERWISE,) for ks in keys]):
        values = dict(base_values)
        for j, key in zip(levels, path):
            values[j] = rep_other[j] if key == OTHERWISE else key
        leaf = _combine(rows, values, spec, full)
        if not leaf and off is not None and _combine(structural, values, spec, full) == off:
            leaf = off  # the branch holding this gene is off, so the OR requirement lapses
        table[path] = leaf
    return ValueTree(gene, tuple(levels), tuple(keys), table, full)


def merge_dependencies(spec: ChromosomeSpec, deps: Sequence[GeneDependency]) -> dict[int, ValueTree]:
    by_gene: dict[int, list[GeneDependency]] = {g.gene_id: [] for g in spec.genes}
    for d in deps:
        by_gene[d.dependent].append(d)
    return {g: _merge_one(g, rows, spec) for g, rows in by_gene.items()}


@dataclass(frozen=True)
class DependencyChains:
    mains: tuple[tuple[int, ...], ...]
    dependents: tuple[tuple[int, ...], ...]

    @classmethod
    def from_dependencies(cls, n_genes: int, deps: Iterable[GeneDependency]) -> "DependencyChains":
        mains = [set() for _ in range(n_genes)]
        dependents = [set() for _ in range(n_genes)]
        for d in deps:
            mains[d.dependent].add(d.main)
            dependents[d.main].add(d.dependent)
        return cls(tuple(tuple(sorted(s)) for s in mains), tuple(tuple(sorted(s)) for s in dependents))

    def component_of(self, gene: int) -> set[int]:
        seen = {gene}
        stack = [gene]
        while stack:
            x = stack.pop()
            for y in self.mains[x] + self.dependents[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return seen


@dataclass(frozen=True, eq=False)
class Transposed:
    """Everything the search needs from one feature model."""

    model: FeatureModel
    grown: GrownModel
    spec: ChromosomeSpec
    dependencies: tuple[GeneDependency, ...]
    trees: Mapping[int, ValueTree]
    chains: DependencyChains

    def dependency_document(self) -> str:
        return json.dumps(
            {
                "dependencies": [d.to_dict() for d in self.dependencies],
                "value_trees": [self.trees[g].to_dict() for g in sorted(self.trees)],
            },
            indent=1,
        )


def extract_dependencies(g: GrownModel, spec: ChromosomeSpec) -> list[GeneDependency]:
    return _dedupe(
        extract_vertical(g, spec)
        + extract_horizontal(g, spec)
        + refactor_cross_branch(g, spec, g.base.cross_deps)
    )


def transpose(model: FeatureModel) -> Transposed:
    grown = grow_model(model)
    spec = identify_genes(grown)
    deps = extract_dependencies(grown, spec)
    trees = merge_dependencies(spec, deps)
    chains = DependencyChains.from_dependencies(len(spec.genes), deps)
    return Transposed(model, grown, spec, tuple(deps), trees, chains)
