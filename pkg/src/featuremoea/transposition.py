"""Grow a feature model and read off its elitist chromosome.

Growing attaches synthetic On/Off children so that every feature whose
selection is a free decision ends up parenting an XOR group with at least two
members. Those XOR parents are the genes; everything else is implied by them.

Rules, applied in order:

* ``G1``: a leaf in an OR group gains XOR{On, Off}.
* ``G2``: any other leaf outside an XOR group gains XOR{On}.
* ``G3``: a deselectable branch, and every branch below it, gains Off unless
  one is already present (a numeric 0 counts as Off).
* ``GA``: a deselectable branch whose state no descendant pins down gains On,
  so its Off is not a lone member. Without it, an optional branch holding only
  optional children would lose the "branch on, all children off" state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from .feature_model import (
    CATEGORICAL,
    MANDATORY,
    NUMERIC,
    OPTIONAL,
    OR,
    VALUE,
    XOR,
    FeatureModel,
    model_to_dict,
)

ON = "On"
OFF = "Off"


@dataclass(frozen=True)
class AddedChild:
    owner: str
    label: str  # ON or OFF
    rule: str  # G1, G2, G3 or GA


@dataclass(frozen=True)
class Option:
    label: str
    feature: str | None = None  # original XOR member, None for synthetic On/Off
    value: float | None = None
    is_off: bool = False


@dataclass(frozen=True, eq=False)
class GrownModel:
    base: FeatureModel
    added: tuple[AddedChild, ...]

    @cached_property
    def _added_by_owner(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {}
        for a in self.added:
            out.setdefault(a.owner, []).append(a.label)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def options(self) -> dict[str, tuple[Option, ...]]:
        """Final XOR options per feature (empty tuple when it has none)."""
        m = self.base
        out = {}
        for fid in m.preorder:
            extra = self._added_by_owner.get(fid, ())
            g = m.xor_group(fid)
            off: list[Option] = []
            rest: list[Option] = []
            if g is not None:
                for x in g.members:
                    f = m.features[x]
                    if f.kind == VALUE:
                        o = Option(_fmt(f.numeric_value), x, f.numeric_value, f.numeric_value == 0)
                    else:
                        o = Option(x, x)
                    (off if o.is_off else rest).append(o)
            if OFF in extra:
                numeric = m.features[fid].kind == NUMERIC
                off.append(Option("0" if numeric else OFF, None, 0.0 if numeric else None, True))
            if ON in extra:
                rest.append(Option(ON))
            out[fid] = tuple(off + rest)
        return out

    def is_gene(self, fid: str) -> bool:
        return len(self.options[fid]) >= 2

    def has_off(self, fid: str) -> bool:
        return any(o.is_off for o in self.options[fid])

    def is_xor_member(self, fid: str) -> bool:
        """Member of a multi-member XOR group, so fixed by its parent's choice."""
        return self.base.relation(fid) == XOR

    @cached_property
    def closest_gene_descendants(self) -> dict[str, tuple[str, ...]]:
        m = self.base
        out: dict[str, tuple[str, ...]] = {}
        for fid in reversed(m.preorder):
            acc: list[str] = []
            for c in m.children[fid]:
                if self.is_gene(c):
                    acc.append(c)
                else:
                    acc.extend(out[c])
            out[fid] = tuple(acc)
        return out

    def as_feature_model(self) -> FeatureModel:
        """Materialize synthetic children as ordinary features."""
        doc = model_to_dict(self.base)
        by_id = {g["id"]: g for g in doc["groups"]}
        for a in self.added:
            m = self.base
            numeric = m.features[a.owner].kind == NUMERIC
            g = m.xor_group(a.owner)
            gid = g.id if g is not None else f"{a.owner}#xor"
            if gid not in by_id:
                by_id[gid] = {"id": gid, "owner": a.owner, "kind": XOR, "members": []}
                doc["groups"].append(by_id[gid])
            fid = f"{a.owner}#{a.label}"
            item = {
                "id": fid,
                "name": a.label,
                "kind": VALUE if numeric else CATEGORICAL,
                "parent": a.owner,
                "relation": XOR,
                "group": gid,
            }
            if numeric:
                item["numeric_value"] = 0.0
            doc["features"].append(item)
            by_id[gid]["members"].append(fid)
        from .feature_model import model_from_dict

        return model_from_dict(doc)


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(v)


def _is_synthetic(m: FeatureModel, fid: str, label: str) -> bool:
    f = m.features[fid]
    return f.relation == XOR and not m.children[fid] and f.name == label and "#" in fid


def grow_model(m: FeatureModel) -> GrownModel:
    added: list[AddedChild] = []
    has_on: set[str] = set()
    has_off: set[str] = set()
    kids = m.children

    for fid in m.preorder:
        g = m.xor_group(fid)
        if g is None:
            continue
        for x in g.members:
            if m.is_zero_value(x) or _is_synthetic(m, x, OFF):
                has_off.add(fid)
            if _is_synthetic(m, x, ON):
                has_on.add(fid)

    def add(fid: str, label: str, rule: str) -> None:
        added.append(AddedChild(fid, label, rule))
        (has_on if label == ON else has_off).add(fid)

    synthetic = {f for f in m.preorder if _is_synthetic(m, f, ON) or _is_synthetic(m, f, OFF)}
    leaves = [f for f in m.preorder if f != m.root and not kids[f] and f not in synthetic]
    for fid in leaves:  # G1
        if m.relation(fid) == OR:
            add(fid, ON, "G1")
            add(fid, OFF, "G1")
    for fid in leaves:  # G2
        if m.relation(fid) in (MANDATORY, OPTIONAL):
            add(fid, ON, "G2")

    def is_branch(fid: str) -> bool:
        return bool(kids[fid]) or fid in has_on or fid in has_off

    for fid in m.preorder:  # G3
        if fid == m.root or not is_branch(fid) or not m.is_deselectable(fid):
            continue
        stack = [fid]
        while stack:
            x = stack.pop()
            if is_branch(x) and x not in has_off:
                add(x, OFF, "G3")
            stack.extend(kids[x])

    # GA: pin down deselectable branches that nothing below determines.
    grouped_or = {
        fid for fid in m.preorder
        if any(g.kind == OR and len(g.members) > 1 for g in m.owned_groups[fid])
    }
    determined: dict[str, bool] = {}
    n_added: dict[str, int] = {}
    for a in added:
        n_added[a.owner] = n_added.get(a.owner, 0) + 1
    for fid in reversed(m.preorder):
        xg = m.xor_group(fid)
        n_opts = (len(xg.members) if xg else 0) + n_added.get(fid, 0)
        gene = n_opts >= 2
        anchored = (
            gene
            or fid in grouped_or
            or any(m.relation(c) == MANDATORY and determined[c] for c in kids[fid])
        )
        if (
            not anchored
            and fid != m.root
            and fid not in synthetic
            and m.relation(fid) != XOR
            and not m.is_core(fid)
        ):
            add(fid, ON, "GA")
            anchored = True
        determined[fid] = anchored
    return GrownModel(m, tuple(added))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneSpec:
    gene_id: int
    source_feature: str
    options: tuple[Option, ...]
    is_numeric: bool

    @property
    def off_index(self) -> int | None:
        return 0 if self.options and self.options[0].is_off else None

    def __len__(self) -> int:
        return len(self.options)


@dataclass(frozen=True, eq=False)
class ChromosomeSpec:
    genes: tuple[GeneSpec, ...]

    @cached_property
    def search_space_size(self) -> int:
        return math.prod(len(g.options) for g in self.genes)

    @cached_property
    def gene_of(self) -> dict[str, int]:
        return {g.source_feature: g.gene_id for g in self.genes}

    @cached_property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(g.options) for g in self.genes)

    def __len__(self) -> int:
        return len(self.genes)

    def to_dict(self) -> dict:
        return {
            "search_space_size": str(self.search_space_size),
            "genes": [
                {
                    "gene_id": g.gene_id,
                    "source_feature": g.source_feature,
                    "is_numeric": g.is_numeric,
                    "options": [o.label for o in g.options],
                }
                for g in self.genes
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def identify_genes(g: GrownModel) -> ChromosomeSpec:
    m = g.base
    genes = []
    for fid in m.preorder:
        if g.is_gene(fid):
            genes.append(
                GeneSpec(len(genes), fid, g.options[fid], m.features[fid].kind == NUMERIC)
            )
    return ChromosomeSpec(tuple(genes))


def decode_solution(spec: ChromosomeSpec, g: GrownModel, assignment: Sequence[int]) -> frozenset:
    """Map per-gene option indices to the configuration they stand for."""
    if len(assignment) != len(spec.genes):
        raise IndexError(f"expected {len(spec.genes)} genes, got {len(assignment)}")
    m = g.base
    chosen: dict[str, Option] = {}
    for gs, idx in zip(spec.genes, assignment):
        if not 0 <= idx < len(gs.options):
            raise IndexError(f"gene {gs.gene_id}: option {idx} out of range")
        chosen[gs.source_feature] = gs.options[idx]
    selected: set[str] = set()

    def visit(fid: str) -> bool:
        # children first so "any child selected" is available
        child_on = [visit(c) for c in m.children[fid]]
        if fid == m.root:
            on = True
        elif m.is_zero_value(fid):
            on = False
        elif fid in chosen:
            on = not chosen[fid].is_off
        elif g.is_xor_member(fid) and m.features[fid].parent in chosen:
            on = chosen[m.features[fid].parent].feature == fid
        elif m.is_core(fid):
            on = True
        else:
            on = any(child_on)
        if on:
            selected.add(fid)
        return on

    visit(m.root)
    return frozenset(selected)
