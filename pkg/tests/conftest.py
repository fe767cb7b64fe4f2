import pytest

import weightlab as wl


@pytest.fixture(scope="session")
def zero_table_k14():
    """Deep zero table shared by the acceptance scans (expensive: ~1-2 min)."""
    return wl.zero_table(14, 1e-12, 12)
