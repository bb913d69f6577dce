"""Bundled feature models: the web-stack example and the small cache model.

The web-stack model is a reconstruction. Its structure follows the named
features and dependencies of the running example; value grids for the
numeric features are chosen to give 1151 features in total.
"""

from __future__ import annotations

import json
from importlib import resources

from .feature_model import (
    CATEGORICAL,
    EXCLUDE,
    MANDATORY,
    NUMERIC,
    OPTIONAL,
    OR,
    RANGE_TO_RANGE,
    VALUE,
    XOR,
    FeatureModel,
    model_from_dict,
    parse_model,
)

# numeric feature -> its discretized values (0 means the feature is off)
WEB_STACK_VALUES = {
    "maxThreads": [float(v) for v in range(5, 1005, 5)],  # 200
    "minSpareThreads": [float(v) for v in range(5, 1005, 5)],  # 200
    "Heap Size": [float(v) for v in range(0, 510, 10)],  # 51, MB
    "Disk Size": [float(v) for v in range(0, 510, 10)],  # 51, MB
    "Max Connections": [float(v) for v in range(10, 1900, 10)],  # 189
    "Query Cache Size": [float(v) for v in range(0, 35)],  # 35, MB
    "CPU": [float(v) for v in range(50, 450, 50)],  # 8, percent of one core
    "Memory": [float(v) for v in range(256, 256 + 398 * 4, 4)],  # 398, MB
}


class _Doc:
    def __init__(self, root: str):
        self.features = [dict(id=root, name=root, kind=CATEGORICAL, parent=None, relation=None, group=None)]
        self.groups: list[dict] = []
        self.root = root

    def add(self, fid, parent, relation=MANDATORY, kind=CATEGORICAL, group=None, value=None):
        f = dict(id=fid, name=fid, kind=kind, parent=parent, relation=relation, group=group)
        if value is not None:
            f["numeric_value"] = value
        self.features.append(f)
        return fid

    def group(self, gid, owner, kind, members):
        self.groups.append(dict(id=gid, owner=owner, kind=kind, members=list(members)))

    def numeric(self, fid, parent, values, relation=MANDATORY, group=None):
        self.add(fid, parent, relation, NUMERIC, group)
        members = []
        for v in values:
            vid = f"{fid}={v:g}"
            members.append(self.add(vid, fid, XOR, VALUE, f"{fid}.values", v))
        self.group(f"{fid}.values", fid, XOR, members)

    def model(self, deps) -> FeatureModel:
        return model_from_dict(dict(root=self.root, features=self.features, groups=self.groups, dependencies=deps))


def build_web_stack() -> FeatureModel:
    v = WEB_STACK_VALUES
    d = _Doc("SAS")
    d.add("Tomcat", "SAS")
    d.numeric("maxThreads", "Tomcat", v["maxThreads"])
    d.numeric("minSpareThreads", "Tomcat", v["minSpareThreads"])
    d.add("RUBiS", "SAS")
    d.add("Transmission Compression", "RUBiS", OPTIONAL)
    d.add("Cache", "RUBiS", OPTIONAL)
    d.add("Cache Mode", "Cache")
    d.add("Zipped", "Cache Mode", XOR, group="Cache Mode.xor")
    d.add("Unzipped", "Cache Mode", XOR, group="Cache Mode.xor")
    d.group("Cache Mode.xor", "Cache Mode", XOR, ["Zipped", "Unzipped"])
    d.add("Cache Size", "Cache")
    d.numeric("Heap Size", "Cache Size", v["Heap Size"], OR, "Cache Size.or")
    d.numeric("Disk Size", "Cache Size", v["Disk Size"], OR, "Cache Size.or")
    d.group("Cache Size.or", "Cache Size", OR, ["Heap Size", "Disk Size"])
    d.add("MySQL", "SAS")
    d.numeric("Max Connections", "MySQL", v["Max Connections"])
    d.numeric("Query Cache Size", "MySQL", v["Query Cache Size"], OPTIONAL)
    d.add("VM", "SAS")
    d.numeric("CPU", "VM", v["CPU"])
    d.numeric("Memory", "VM", v["Memory"])
    deps = [
        dict(kind=RANGE_TO_RANGE, dependent={"feature": "maxThreads"}, main={"feature": "minSpareThreads"},
             comparator=">="),
        dict(kind=EXCLUDE, dependent={"feature": "Cache Mode", "value": "Zipped"},
             main={"feature": "Transmission Compression"}),
        dict(kind=RANGE_TO_RANGE, dependent={"feature": "Heap Size"}, main={"feature": "Memory"}, comparator="<="),
    ]
    return d.model(deps)


def build_mini_cache() -> FeatureModel:
    d = _Doc("SAS")
    d.add("Cache", "SAS", OPTIONAL)
    d.add("Cache Mode", "Cache")
    d.add("zipped", "Cache Mode", XOR, group="mode")
    d.add("unzipped", "Cache Mode", XOR, group="mode")
    d.group("mode", "Cache Mode", XOR, ["zipped", "unzipped"])
    return d.model([])


def load_bundled(name: str) -> FeatureModel:
    """Read a model shipped in the package data directory (e.g. ``"web_stack.json"``)."""
    text = resources.files("featuremoea").joinpath("data", name).read_text()
    return parse_model(text)


def bundled_names() -> list[str]:
    return sorted(p.name for p in resources.files("featuremoea").joinpath("data").iterdir()
                  if p.name.endswith(".json"))


def _dump(m: FeatureModel) -> str:
    from .feature_model import model_to_dict

    return json.dumps(model_to_dict(m), indent=1) + "\n"
