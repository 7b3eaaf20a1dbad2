import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kramerslab.enthalpy import quartic_default


@pytest.fixture(scope="session")
def quartic():
    return quartic_default()


# grading of the 4001-node oracle grid for the connection program: uniform
# inner zone (the resistance-carrying band), verified to reach 1e-6 agreement
QP_GRID = dict(delta=0.4, power=1.0, fractions=(0.62, 0.18, 0.20))
