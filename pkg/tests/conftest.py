import pytest

from toxiscope.gateway import LmGateway
from toxiscope.mock_llm import MockLmServer
from toxiscope.store import ConversationRecord, DataStore, MessageRecord


@pytest.fixture
def mock_lm():
    server = MockLmServer().start()
    yield server
    server.stop()


@pytest.fixture
def lenient_lm():
    """Mock with deterministic fallbacks for unscripted requests."""
    server = MockLmServer(
        echo_chat=True, default_embeddings=True, default_scores=True
    ).start()
    yield server
    server.stop()


@pytest.fixture
def gw(mock_lm):
    return LmGateway([mock_lm.provider()], backoff_base=0.001)


@pytest.fixture
def lenient_gw(lenient_lm):
    return LmGateway([lenient_lm.provider()], backoff_base=0.001)


@pytest.fixture
def tmp_store(tmp_path):
    return DataStore(tmp_path / "test.db")


def make_conversation(texts, speakers=None, key="conv-1"):
    speakers = speakers or [f"s{i % 2}" for i in range(len(texts))]
    turns = [
        MessageRecord(
            id=f"m{i}",
            text=text,
            conversation_key=key,
            speaker=speakers[i],
            turn_index=i,
        )
        for i, text in enumerate(texts)
    ]
    return ConversationRecord(
        key=key, turns=turns, participants={s for s in speakers if s}
    )
