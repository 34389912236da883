"""The invariant suites themselves (shared with the CLI selftest command)."""

import pytest

from aha.selftest import (
    check_corruption,
    check_gradients,
    check_hopfield,
    check_pattern_separation,
)


def _assert_all_pass(results):
    failed = [r for r in results if not r.passed]
    assert not failed, failed


class TestSuites:
    def test_gradients_small_trial_count(self):
        # The full 100-trial version runs in the acceptance module.
        _assert_all_pass(check_gradients(trials=10))

    def test_hopfield(self):
        _assert_all_pass(check_hopfield())

    def test_pattern_separation(self):
        _assert_all_pass(check_pattern_separation())

    def test_corruption(self):
        _assert_all_pass(check_corruption())
