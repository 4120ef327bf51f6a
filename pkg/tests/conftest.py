import numpy as np
import pytest

from schmidt_tns.lattice import build_hamiltonian, build_zpaf, zpaf_fragment
from schmidt_tns.schmidt_state import init_state, make_architecture


def random_state(n_sites=8, n_layers=2, chi=3, seed=0, eps=1.0):
    lat, bip = zpaf_fragment(n_sites)
    arch = make_architecture(lat, bip, n_layers, chi=chi)
    return lat, bip, init_state(arch, seed=seed, eps=eps)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def cell9():
    lat, bip = build_zpaf(1)
    return lat, bip, build_hamiltonian(lat, "tim", {"h_x": 0.2})


@pytest.fixture
def record(request):
    """Collect one pass/fail line per acceptance criterion for the summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", {})

    def _record(number, name, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2} {name}: {detail}"
        print(line)
        lines[number] = line
        return passed

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
