import os

import pytest

from edgeav.ingest import Area, AreaGrid


@pytest.fixture
def grid3():
    # A1=[0,2000)^2, A2=[2000,4000)x[0,2000), A3=[0,2000)x[2000,4000)
    return AreaGrid([Area("A1", 0, 0), Area("A2", 2000, 0), Area("A3", 0, 2000)])


def workers():
    return max(1, min(8, os.cpu_count() or 1))
