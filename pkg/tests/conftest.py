from __future__ import annotations

import pytest

from citywalk.gateway import CallableTransport, LLMGateway

from rivertown import ScriptedLLM, build_store


@pytest.fixture()
def city_store():
    return build_store()


@pytest.fixture()
def stub_gateway():
    return LLMGateway(mode="stub")


@pytest.fixture()
def scripted_gateway(city_store):
    llm = ScriptedLLM(city_store)
    return LLMGateway(
        mode="live",
        transport=CallableTransport(chat_fn=llm.chat, embed_fn=llm.embed),
    )
