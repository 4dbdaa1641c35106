import pytest

from toolloop.tokenizer import ToyMergeTokenizer


@pytest.fixture()
def tok() -> ToyMergeTokenizer:
    return ToyMergeTokenizer()


def _criterion_label(nodeid: str) -> str | None:
    """Map an acceptance test nodeid to its summary label, or None."""
    if "test_acceptance.py" not in nodeid:
        return None
    name = nodeid.split("::")[-1]
    parts = name.split("_")
    # test_c01_primary_async_speedup -> tier "primary", words after it
    if len(parts) < 4 or parts[0] != "test" or parts[2] not in ("primary", "secondary"):
        return None
    tier = parts[2].upper()
    return f"[{tier}] {' '.join(parts[3:])}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one PASS/FAIL line per acceptance criterion."""
    outcomes: dict[str, str] = {}
    for status, word in (
        ("failed", "FAIL"),
        ("error", "FAIL"),
        ("skipped", "SKIP"),
        ("passed", "PASS"),
    ):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            label = _criterion_label(str(nodeid))
            if label is not None and nodeid not in outcomes:
                outcomes[nodeid] = f"{word} {label}"
    if not outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid in sorted(outcomes):
        terminalreporter.write_line(outcomes[nodeid])
