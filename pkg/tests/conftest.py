from fractions import Fraction

import pytest


@pytest.fixture
def block_params():
    """ell' = 7, d' = 2 parameters of the (2, 1/2, 1) speeds at the smallest block scale with M beta/2 = 1."""
    return {'ell': 7, 'd': 2, 'M': Fraction(6), 'alpha': Fraction(2), 'beta': Fraction(1, 3)}


@pytest.fixture
def clean_env(monkeypatch):
    monkeypatch.delenv('WEDGECP_SEED', raising=False)
    monkeypatch.delenv('WEDGECP_DEFINITIONS', raising=False)
