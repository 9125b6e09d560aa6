import numpy as np
import pytest

from nsi.graph import make_regular_graph
from nsi.panel import TreatmentPanel

# Ring prediction labels: unit 1 is the ego (label 2, both neighbors 1).
# Units 3, 5, 7, 9 reproduce the (1, 2, 1) neighborhood; 11, 12, 13 carry
# label 2 but sit next to another 2, and every label-1 unit borders two 2s.
RING_POST_LABELS = [1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 1, 2, 2, 2]


@pytest.fixture
def donor_ring():
    """Constant training, ring of 14, seven label-2 units besides the ego."""
    n = len(RING_POST_LABELS)
    g = make_regular_graph("ring", n, 2)
    tp = TreatmentPanel.from_parts(np.ones((n, 6), dtype=int), RING_POST_LABELS, 4, 2)
    return g, tp, 1, (1, 2, 1)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        ok, line = results[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {line}")
