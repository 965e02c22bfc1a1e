"""Shared fixtures: one small known table and a clean environment."""

from __future__ import annotations

import os

import pytest

import support
from tablehelm.table_core import Sample, Table


@pytest.fixture(autouse=True)
def _clean_helm_env(monkeypatch):
    # Config lookups read HELM_* variables; tests must not inherit any.
    for key in list(os.environ):
        if key.startswith("HELM_"):
            monkeypatch.delenv(key)


@pytest.fixture
def champions_table() -> Table:
    return support.champions_table()


@pytest.fixture
def champions_sample() -> Sample:
    return support.champions_sample()
