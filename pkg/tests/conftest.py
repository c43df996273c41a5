import numpy as np
import pytest

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""
    def _report(name: str, passed: bool, detail: str = ""):
        _ACCEPTANCE.append((name, bool(passed), detail))
    return _report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def ring(size=7, offset=(1, 1), shape=(12, 12)):
    m = np.zeros(shape, dtype=np.uint8)
    r, c = offset
    m[r:r + size, c:c + size] = 1
    m[r + 1:r + size - 1, c + 1:c + size - 1] = 0
    return m


def cell_complex_euler(mask) -> int:
    """V - E + F of the union of closed unit squares, one per foreground pixel."""
    verts, edges, faces = set(), set(), 0
    for r, c in zip(*np.nonzero(mask)):
        r, c = int(r), int(c)
        faces += 1
        verts.update({(r, c), (r + 1, c), (r, c + 1), (r + 1, c + 1)})
        edges.update({("h", r, c), ("h", r + 1, c), ("v", r, c), ("v", r, c + 1)})
    return len(verts) - len(edges) + faces


def square(size=5, offset=(1, 1), shape=(12, 12)):
    m = np.zeros(shape, dtype=np.uint8)
    m[offset[0]:offset[0] + size, offset[1]:offset[1] + size] = 1
    return m


TRAIN_SEED = 0
HELDOUT_SEED = 10_000


class Trained:
    def __init__(self, config, train_set, heldout, params, history, seconds):
        self.config = config
        self.train_set = train_set
        self.heldout = heldout
        self.params = params
        self.history = history
        self.seconds = seconds


def _train_fixture(**overrides):
    import time

    from pointscatter.model import TrainConfig, train
    from pointscatter.synth import generate_dataset

    config = TrainConfig(**overrides)
    train_set = generate_dataset(TRAIN_SEED, 64)
    heldout = generate_dataset(HELDOUT_SEED, 16)
    t0 = time.perf_counter()
    params, history = train(train_set, config)
    return Trained(config, train_set, heldout, params, history, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def trained_mask():
    """Default-config model trained once per session on 64 synthetic samples."""
    return _train_fixture()


@pytest.fixture(scope="session")
def trained_centerline():
    return _train_fixture(target="centerline", alpha=0.7)
