import _acceptance


def pytest_terminal_summary(terminalreporter):
    if not _acceptance.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_acceptance.VERDICTS):
        terminalreporter.write_line(_acceptance.VERDICTS[cid])
