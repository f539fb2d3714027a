"""Shared pytest hooks: per-criterion PASS/FAIL lines for the acceptance suite."""

from collections import defaultdict

CRITERIA = {
    1: "Hamiltonian conservation",
    2: "period limit and monotonicity",
    3: "indicial roots",
    4: "Pohozaev closed forms",
    5: "radial invariant identity",
    6: "trace-free Ricci on spherical solutions",
    7: "balancing",
    8: "expansion order",
    9: "parameter roundtrip",
}

_outcomes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): test belongs to acceptance criterion k")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        ok = call.excinfo is None
        _outcomes[marker.args[0]].append((item.nodeid, ok))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(CRITERIA):
        runs = _outcomes.get(k)
        if not runs:
            tr.write_line(f"criterion {k} ({CRITERIA[k]}): NOT RUN")
            continue
        failed = [nodeid for nodeid, ok in runs if not ok]
        verdict = "FAIL" if failed else "PASS"
        tr.write_line(f"criterion {k} ({CRITERIA[k]}): {verdict} "
                      f"[{len(runs) - len(failed)}/{len(runs)} checks]")
