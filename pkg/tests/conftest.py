import pytest

from treemart.model import BST, PORT, RT, make_params, mary

FIVE = {
    "bst": BST,
    "rt": RT,
    "port": PORT,
    "half": make_params(0.5, 1),
    "mary3": mary(3),
}


@pytest.fixture(params=list(FIVE), ids=list(FIVE))
def model(request):
    return FIVE[request.param]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
