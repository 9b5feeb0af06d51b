import numpy as np
import pytest
from hypothesis import settings

from propcal import FamilyDesign, design_sequence
from propcal.bench import example1_model, example2_model

settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture()
def simple_family():
    from util import simple_family as make

    return make()


@pytest.fixture(scope="session")
def example1_design():
    from propcal import SequenceModelSpec

    sigma, cutoffs = example1_model()
    spec = SequenceModelSpec(
        sigma=sigma, mu=np.zeros(50), delta=1.0, cutoffs=cutoffs, label="example1"
    )
    return design_sequence(spec)[0]


@pytest.fixture(scope="session")
def example2_design():
    from propcal import SequenceModelSpec

    sigma, cutoffs = example2_model()
    spec = SequenceModelSpec(
        sigma=sigma, mu=np.zeros(50), delta=1.0, cutoffs=cutoffs, label="example2"
    )
    return design_sequence(spec)[0]


@pytest.fixture()
def diagonal_design():
    v = np.array([4.0, 2.0, 1.0])
    return FamilyDesign(v=v, B=np.diag(v), label="diagonal")
