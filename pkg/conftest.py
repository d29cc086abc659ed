"""
Shared fixtures for the sqz test suite
"""

from pathlib import Path

import pytest

from scenarios import random_bytes, run_bytes, sparse_bytes

CORPUS_DIR = Path(__file__).parent / 'corpus'


@pytest.fixture(scope='session')
def text_bytes():
    return (CORPUS_DIR / 'sample.txt').read_bytes()


@pytest.fixture(scope='session')
def byte_corpus(text_bytes):
    """Inputs every byte codec must round-trip"""
    return {
        'empty': b'',
        'one': b'\x2a',
        'two': b'ab',
        'zeros': bytes(4096),
        'ones': b'\xff' * 1000,
        'runs': run_bytes(10_000, 40),
        'long_run': b'\x07' * 700,
        'sparse': sparse_bytes(6000, seed=3),
        'text': text_bytes,
        'random': random_bytes(2000, seed=5),
        'periodic': bytes(range(256)) * 12,
    }

