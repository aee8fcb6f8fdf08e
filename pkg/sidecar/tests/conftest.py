import threading

import pytest

from meshseg_sidecar.service import make_server


@pytest.fixture
def stub_server():
    server = make_server("127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()
