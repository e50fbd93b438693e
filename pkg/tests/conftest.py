import pytest

TINY = """\
# 100 ADC samples per sweep
chirp.carrier_frequency = 3.315e9
chirp.sweep_time = 50e-6
chirp.bandwidth = 10e6
receiver.f_cut = 2e6
code.type = gmsk
code.n_chips = 4
target.0.range_fraction = 0.24   # on-grid: beat bin 12
chain = proposed
"""


@pytest.fixture
def tiny_text():
    return TINY


@pytest.fixture
def tiny_path(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY)
    return path


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record one acceptance line; returns ``ok`` so the test can assert on it."""

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        request.config.stash[_VERDICTS].append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
