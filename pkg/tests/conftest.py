import logging

import numpy as np
import pytest

from hinforge.graph import freeze_graph

logging.getLogger("hinforge").setLevel(logging.ERROR)

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def random_hin(rng, n_authors, n_papers, n_venues, n_labels=2, p_write=0.3, max_mult=1):
    """Random author/paper/venue graph; every author has a label."""
    nodes, edges = [], []
    for a in range(n_authors):
        nodes.append((a, "author", f"c{a % n_labels}", None))
    for p in range(n_papers):
        pid = n_authors + p
        nodes.append((pid, "paper", None, None))
        authors = [a for a in range(n_authors) if rng.random() < p_write]
        if not authors:
            authors = [int(rng.integers(n_authors))]
        for a in authors:
            edges += [(a, pid, "writes")] * int(rng.integers(1, max_mult + 1))
        if n_venues:
            edges.append((pid, n_authors + n_papers + int(rng.integers(n_venues)), "published_in"))
    for v in range(n_venues):
        nodes.append((n_authors + n_papers + v, "venue", None, None))
    schema = {"writes": ("author", "paper"), "published_in": ("paper", "venue")}
    return freeze_graph(nodes, edges, schema)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


APA = ["author", "paper", "author"]
APVPA = ["author", "paper", "venue", "paper", "author"]
