import pytest

from feedlab.sim import SimConfig, run_study

SMALL = SimConfig(n_participants=16, mean_session_views=20, pool_size=600, master_seed=5)
ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def small_bundle(tmp_path_factory):
    """A finished, tiny simulated study written to disk."""
    root = tmp_path_factory.mktemp("bundle") / "run1"
    run_study(SMALL, root)
    return root


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion and print it right away."""
    results = request.config.stash.setdefault(ACCEPTANCE, {})
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(number: int, ok: bool, detail: str) -> None:
        results[number] = (ok, detail)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(_line(number, ok, detail))

    return record


def _line(number, ok, detail):
    return f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(_line(number, *results[number]))
