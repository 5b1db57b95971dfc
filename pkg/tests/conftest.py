import pytest

from ria_ibc.channel import generate
from ria_ibc.frame import build_frame
from ria_ibc.precoding import SLOTS, build_precoders
from ria_ibc.simulator import draw_symbols


@pytest.fixture(scope="session")
def frame():
    return build_frame(SLOTS)


@pytest.fixture(scope="session")
def channels(frame):
    return generate(1, frame, 4, 1)


@pytest.fixture(scope="session")
def precoders(channels):
    return build_precoders(channels, 1)


@pytest.fixture(scope="session")
def symbols():
    return draw_symbols(1)
