def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, taken from recorded test properties."""
    rows = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            label = dict(getattr(rep, "user_properties", ())).get("criterion")
            if label is None:
                continue
            verdict = "PASS" if outcome == "passed" and rep.when == "call" else "FAIL"
            if rows.get(label) != "FAIL":
                rows[label] = verdict
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(rows, key=lambda s: int(s.split()[0])):
        terminalreporter.write_line(f"{rows[label]}  criterion {label}")
