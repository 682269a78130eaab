"""Shared fixtures: cached preset runs and the acceptance-gate summary."""

import time

import pytest

from gkdv.harness import preset
from gkdv.harness.runs import execute

# criterion id -> (passed, one-line detail); printed after the run
_GATE = {}


def record_criterion(cid: int, passed: bool, detail: str) -> None:
    _GATE[cid] = (bool(passed), detail)


_TITLES = {
    1: "solver fidelity",
    2: "integrable two-soliton oracle",
    3: "modulation correctness",
    4: "quadratic-form positivity",
    5: "localized-mass monotonicity",
    6: "quadratic speed control",
    7: "asymptotic decay probe",
    8: "interaction-tail exponent fits",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _GATE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_GATE):
        ok, detail = _GATE[cid]
        tag = "PASS" if ok else "FAIL"
        terminalreporter.write_line(
            f"[{tag}] criterion {cid} ({_TITLES[cid]}): {detail}")


@pytest.fixture(scope="session")
def preset_run(tmp_path_factory):
    """Run a named preset once per session; returns (report, outdir, seconds)."""
    cache = {}

    def run(name: str):
        if name not in cache:
            outdir = tmp_path_factory.mktemp(f"run-{name}")
            t0 = time.monotonic()
            report = execute(preset(name), outdir)
            cache[name] = (report, outdir, time.monotonic() - t0)
        return cache[name]

    return run


def check_map(report):
    return {c.name: c for c in report.checks}
