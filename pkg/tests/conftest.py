import numpy as np
import pytest

_CRITERION_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    def _record(number: int, status: str, detail: str = ""):
        line = f"criterion {number:2d}: {status}" + (f"  [{detail}]" if detail else "")
        _CRITERION_LINES.append((number, line))
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERION_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def warm_kernels():
    """Trigger the compiled kernels once so timed tests measure the
    algorithms, not the first-call compilation."""
    from escert.quadmap import DitherSpec, GainSpec, QuadraticMap
    from escert.sim_ct import CtSimConfig, simulate_ct
    from escert.oracle import ct_window_norms

    qmap = QuadraticMap(0.0, [0.0], [[2.0]])
    dither = DitherSpec([0.1], [1], 0.1)
    gains = GainSpec([-0.01])
    simulate_ct(CtSimConfig(qmap, dither, gains, [0.5], t_end=0.2, step=0.1 / 64))
    ct_window_norms([qmap], dither, gains, np.array([[0.5]]), 0.2)
    return True
