import numpy as np
import pytest

from nmm.datasets import generate_blobs, generate_smiley, generate_spiral
from nmm.problems import (
    build_nonconvex_1d_hierarchy,
    build_quadratic_hierarchy,
    build_resnet_hierarchy,
)


def small_resnet(name="spiral", n_s=32, width=4):
    gen = {"spiral": generate_spiral, "smiley": generate_smiley,
           "blobs": lambda n, s: generate_blobs(n, 3, s)}[name]
    return build_resnet_hierarchy(gen(n_s, 0), coarse_blocks=3, refinements=2, width=width)


HIERARCHIES = {
    "quadratic": lambda: build_quadratic_hierarchy(7, 3, seed=0),
    "nonconvex1d": lambda: build_nonconvex_1d_hierarchy(7, 3),
    "resnet-spiral": lambda: small_resnet("spiral"),
    "resnet-smiley": lambda: small_resnet("smiley"),
}


@pytest.fixture(params=sorted(HIERARCHIES))
def hierarchy(request):
    return HIERARCHIES[request.param]()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
