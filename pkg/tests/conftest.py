import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # makes helpers/oracles importable

from helpers import PlaybackServer


@pytest.fixture
def playback_server():
    server = PlaybackServer()
    yield server
    server.close()
