import time

import pytest

from switchguard import demo
from switchguard.synthesis import synthesize


@pytest.fixture(scope="session")
def plant():
    return demo.demo_plant()


@pytest.fixture(scope="session")
def nominal_setup(plant):
    return plant, demo.nominal_model(), demo.nominal_automaton(), demo.nominal_synthesis_config()


@pytest.fixture(scope="session")
def switching_setup(plant):
    return plant, demo.demo_model(), demo.demo_automaton(), demo.switching_synthesis_config()


@pytest.fixture(scope="session")
def nominal_synthesis(nominal_setup):
    """(result, elapsed seconds) for the single-mode reference problem."""
    plant, model, automaton, config = nominal_setup
    t0 = time.perf_counter()
    result = synthesize(plant, model, automaton, config)
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def switching_synthesis(switching_setup):
    """(result, elapsed seconds) for the two-mode reference problem."""
    plant, model, automaton, config = switching_setup
    t0 = time.perf_counter()
    result = synthesize(plant, model, automaton, config)
    return result, time.perf_counter() - t0
