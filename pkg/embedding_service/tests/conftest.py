import pytest
from fastapi.testclient import TestClient

from embedding_service.app import create_app
from embedding_service.encoder import EncoderConfig


@pytest.fixture(scope="session")
def client():
    config = EncoderConfig(dim=32, seed=0, max_tokens=64, batch_cap=8, max_chars=300)
    with TestClient(create_app(config)) as c:
        yield c
