import json

import numpy as np
import pytest
from click.testing import CliRunner
from hypothesis import settings

from entverify import create_app
from entverify.config import Config
from entverify.serialization import channel_to_dict, state_to_dict
from entverify.services.ueb import dense_coding_channel, teleportation_channel, weyl_basis

from builders import bell

settings.register_profile("entverify", deadline=None, max_examples=25)
settings.load_profile("entverify")


class UnitTestConfig(Config):
    TOL = 1e-9
    VERDICT_TOL = 1e-8
    SEED = 0
    LOG_LEVEL = "WARNING"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def pauli():
    return weyl_basis(2)


@pytest.fixture
def teleport(pauli):
    return teleportation_channel(pauli)


@pytest.fixture
def dense(pauli):
    return dense_coding_channel(pauli)


@pytest.fixture
def bell2():
    return bell(2)


@pytest.fixture
def app():
    return create_app(UnitTestConfig)


@pytest.fixture
def runner():
    # Click >= 8.2 removed ``mix_stderr``; stderr is always captured separately.
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:
        return CliRunner()


@pytest.fixture
def write_json(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    return _write


@pytest.fixture
def channel_file(write_json):
    def _write(channel, name="channel.json"):
        return write_json(name, channel_to_dict(channel))

    return _write


@pytest.fixture
def state_file(write_json):
    def _write(state, name="state.json"):
        return write_json(name, state_to_dict(state))

    return _write
