import itertools

import pytest

from featuremoea.feature_model import CATEGORICAL, model_from_dict
from featuremoea.transposition import decode_solution


def feat(fid, parent=None, relation=None, kind=CATEGORICAL, group=None, value=None):
    d = dict(id=fid, name=fid, kind=kind, parent=parent, relation=relation, group=group)
    if value is not None:
        d["numeric_value"] = value
    return d


def build(root, features, groups=(), deps=()):
    return model_from_dict(dict(root=root, features=[feat(root)] + list(features),
                                groups=list(groups), dependencies=list(deps)))


def decoded_valid(t):
    """Configurations reached by every chromosome assignment that passes all value trees."""
    out = set()
    for a in itertools.product(*[range(n) for n in t.spec.sizes]):
        if all(a[g] in t.trees[g].allowed(a) for g in range(len(a))):
            out.add(decode_solution(t.spec, t.grown, a))
    return out


@pytest.fixture(scope="session")
def web_stack():
    from featuremoea.dependency import transpose
    from featuremoea.models import build_web_stack

    return transpose(build_web_stack())


@pytest.fixture(scope="session")
def soa_setup():
    from featuremoea.experiment import Setup

    return Setup.default()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
