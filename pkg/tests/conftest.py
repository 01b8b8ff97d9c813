import numpy as np
import pytest

from acpsg.dataset import SynthConfig, generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_cfg():
    return SynthConfig(num_seen=6, num_unseen=3, num_attributes=12, num_attribute_groups=4,
                       feature_dim=16, samples_per_class_train=10, samples_per_class_test=5,
                       noise_scale=0.3, seed=3)


@pytest.fixture(scope="session")
def small_dataset(small_cfg):
    return generate_synthetic(small_cfg)


def random_connected_graph(rng, n):
    """Nonnegative symmetric adjacency with a spanning path, zero diagonal."""
    A = rng.random((n, n)) * (rng.random((n, n)) < 0.3)
    A = np.triu(A, 1)
    idx = rng.permutation(n)
    for a, b in zip(idx[:-1], idx[1:]):
        A[min(a, b), max(a, b)] += 0.1 + rng.random()
    return A + A.T


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Yield a dict; the test fills ``detail`` and the outcome line is recorded at teardown."""
    info = {"id": request.node.name, "detail": ""}
    yield info
    rep = getattr(request.node, "rep_call", None)
    if rep is None:
        return
    status = "SKIP" if rep.skipped else ("PASS" if rep.passed else "FAIL")
    ACCEPTANCE_LINES.append(f"[{status}] {info['id']}: {info['detail']}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" or (rep.when == "setup" and rep.skipped):
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
