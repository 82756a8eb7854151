"""Hypothesis strategies for expression trees, forms and connections in four dimensions."""
from functools import lru_cache
from itertools import combinations
from typing import Mapping

from hypothesis import strategies as st

from formflow.core import expr as ex
from formflow.core.errors import DomainViolationError
from formflow.core.forms import DifferentialForm

COORDS = ("x", "y", "z", "w")
CONSTANTS = (-1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0)

leaves = st.one_of(st.sampled_from(COORDS).map(ex.Var), st.sampled_from(CONSTANTS).map(ex.Const))

points = st.fixed_dictionaries({name: st.floats(min_value=-1.0, max_value=1.0) for name in COORDS})


def _one_plus_square(e: ex.Expression) -> ex.Expression:
    return ex.Binary("add", ex.Const(1.0), ex.Binary("pow", e, ex.Const(2.0)))


def _branches(children: st.SearchStrategy) -> st.SearchStrategy:
    # every branch stays defined on the whole real line
    return st.one_of(
        st.builds(ex.Binary, st.sampled_from(("add", "sub", "mul")), children, children),
        st.builds(lambda a, b: ex.Binary("div", a, _one_plus_square(b)), children, children),
        st.builds(lambda a, k: ex.Binary("pow", a, ex.Const(k)), children, st.sampled_from((2.0, 3.0))),
        st.builds(ex.Unary, st.sampled_from(("neg", "sin", "cos")), children),
        children.map(lambda a: ex.Unary("exp", ex.Unary("sin", a))),
        st.builds(lambda f, a: ex.Unary(f, _one_plus_square(a)), st.sampled_from(("ln", "sqrt")), children),
    )


@lru_cache(maxsize=None)
def expressions(depth: int = 6) -> st.SearchStrategy:
    """Raw (unfolded) trees with at most ``depth`` generated levels."""
    if depth == 0:
        return leaves
    return st.one_of(leaves, _branches(expressions(depth - 1)))


def peak(e: ex.Expression, at: Mapping[str, float]) -> float:
    """Largest magnitude of any subexpression at ``at``."""
    value = abs(ex.evaluate(e, at))
    if isinstance(e, ex.Unary):
        return max(value, peak(e.arg, at))
    if isinstance(e, ex.Binary):
        return max(value, peak(e.left, at), peak(e.right, at))
    return value


def forms(degree: int, depth: int = 3) -> st.SearchStrategy:
    indices = list(combinations(range(len(COORDS)), degree))
    return st.lists(expressions(depth), min_size=len(indices), max_size=len(indices)).map(
        lambda coefficients: DifferentialForm(COORDS, degree, dict(zip(indices, coefficients)))
    )


triples = st.tuples(*(st.integers(min_value=0, max_value=len(COORDS) - 1) for _ in range(3)))

# full connection coefficients gamma[(s, a, b)] = G^s_ab
gammas = st.dictionaries(triples, expressions(2), max_size=8)


def tame(at: Mapping[str, float], *expressions_: ex.Expression, limit: float = 50.0) -> bool:
    """Every subexpression evaluates at ``at`` with magnitude at most ``limit``."""
    try:
        return all(peak(e, at) <= limit for e in expressions_)
    except DomainViolationError:
        return False
