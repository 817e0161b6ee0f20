"""Shared fixtures: mock endpoint stacks, configs, and corpora."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from semgate.backends.client import ChatClient
from semgate.backends.corpus import make_corpus
from semgate.core.config import parse_config
from semgate.core.types import ModelEndpoint


def mock_endpoint(rule: str, role: str = "mock", **kwargs) -> ModelEndpoint:
    return ModelEndpoint(role=role, base_url=f"mock:{rule}", model_name=f"mock-{rule}", **kwargs)


@pytest.fixture
def mock_stack_config(tmp_path):
    """Gateway config with the context-swap/arith-solver/inverse-swap mocks."""
    return parse_config(
        {
            "endpoints": {
                "cloud": {"base_url": "mock:arith_solver"},
                "encoder": {"base_url": "mock:context_swap"},
                "decoder": {"base_url": "mock:context_swap_inverse"},
                "judge": {"base_url": "mock:judge_const"},
            },
            "store": {"path": str(tmp_path / "sessions.jsonl")},
        },
        base_dir=tmp_path,
    )


@pytest.fixture
def recording_client():
    """Client whose outbound request bodies are captured for inspection."""
    records = []
    client = ChatClient(recorder=records.append)
    client.records = records
    return client


@pytest.fixture
def corpus100():
    return make_corpus(100, seed=0)


@pytest.fixture
def corpus_file(tmp_path, corpus100):
    path = tmp_path / "corpus.jsonl"
    with open(path, "w", encoding="utf-8") as f:
        for it in corpus100:
            f.write(json.dumps({"id": it.id, "question": it.question, "label": it.label}) + "\n")
    return path


@pytest.fixture(scope="session")
def fixtures_dir():
    return Path(__file__).parent / "fixtures"
