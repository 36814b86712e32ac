"""The twelve acceptance criteria at their stated tolerances.

Each result line (``[PASS]``/``[FAIL]``) is printed in the terminal summary
under "acceptance criteria".
"""

import pytest

from stochvort import checks

RESULTS = {}


@pytest.mark.parametrize("check", checks.ALL_CHECKS, ids=lambda f: f.__name__.removeprefix("check_"))
def test_criterion(check):
    result = check()
    RESULTS[result.number] = result
    print(result.line())
    assert result.passed, result.summary
    assert result.elapsed <= result.budget, f"took {result.elapsed:.1f}s, budget {result.budget:g}s"
