import re


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, with whatever detail the test recorded."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call" or "test_acceptance.py" not in rep.nodeid:
                continue
            m = re.search(r"test_criterion_(\d+)_(\w+)", rep.nodeid)
            if not m:
                continue
            detail = "; ".join(f"{k}={v}" for k, v in rep.user_properties)
            lines.append((int(m.group(1)), f"criterion {m.group(1)} {outcome.upper()[:4]:4} "
                                            f"{m.group(2)}  {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
