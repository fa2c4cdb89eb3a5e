import sys
from pathlib import Path

import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from lstar_mdp import Mdp, build_coffee_machine, random_deterministic_mdp  # noqa: E402


@pytest.fixture
def coffee():
    return build_coffee_machine()


@st.composite
def random_mdps(draw, max_states=5, inputs=("a", "b"), outputs=("x", "y", "z")):
    """Random deterministic MDPs driven by a drawn seed."""
    seed = draw(st.integers(0, 2**32 - 1))
    n = draw(st.integers(1, max_states))
    return random_deterministic_mdp(seed, n, inputs, outputs)


def two_state_chain(p=0.5):
    """x --a--> {x: 1-p, y: p}, y absorbing."""
    return Mdp(
        ("a",),
        ("x", "y"),
        ("x", "y"),
        [{"a": {0: 1 - p, 1: p}}, {"a": {1: 1.0}}],
    )


# acceptance verdicts, printed once at the end of the session
ACCEPTANCE = {}


def record(criterion, ok, detail=""):
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
