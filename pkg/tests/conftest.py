"""Shared pytest wiring.

The acceptance tests each cover one release criterion; after the run a
summary block prints one PASS/FAIL line per criterion so the verdict is
readable without digging through the dotted progress output.
"""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for status, label in (("passed", "PASS"), ("failed", "FAIL"),
                          ("error", "FAIL")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" not in nodeid:
                continue
            if status == "passed" and getattr(rep, "when", "call") != "call":
                continue
            name = nodeid.split("::")[-1]
            criterion = name.removeprefix("test_").replace("_", " ")
            rows.append((label, criterion))
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for label, criterion in dict.fromkeys(rows):
            terminalreporter.write_line(f"{label}: {criterion}")
