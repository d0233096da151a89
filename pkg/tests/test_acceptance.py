"""One test per acceptance criterion; each prints a single PASS/FAIL line (run with -s to see them)."""

import pytest

from geoflow import acceptance as A

_CORE: list = []


def _core():
    if not _CORE:
        _CORE.extend(A.run_core(A.DEFAULT_SEED))
    return _CORE


def _report(res: A.CriterionResult) -> None:
    print(f"criterion {res.number:2d} {'PASS' if res.passed else 'FAIL'} ({res.runtime:.2f}s) {res.name}: {res.detail}")
    assert res.passed, res.detail


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(number):
    _report(_core()[number - 1])


def test_criterion_11_determinism_and_mutation():
    _report(A.criterion_11(_core(), A.DEFAULT_SEED))
