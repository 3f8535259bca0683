from __future__ import annotations

import pytest

from forklab.errors import InvalidLoop
from forklab.loops import detect_counted, find_loops, node_census
from forklab.parser import parse


def fn_of(source: str, name: str = "main"):
    return parse(source).functions[name]


def test_single_top_level_while():
    fn = fn_of("fn main(n) { let i = 0; while (i < n) { i = i + 1; } }")
    [info] = find_loops(fn)
    assert (info.depth, info.parent, info.children) == (1, None, [])


def test_nested_while_for():
    fn = fn_of(
        "fn main(n) { let i = 0; while (i < n) {"
        " for (j = 0; j < 4; j += 1) { out(j); } i = i + 1; } }"
    )
    outer, inner = find_loops(fn)
    assert outer.depth == 1 and inner.depth == 2
    assert inner.parent == outer.loop_id
    assert outer.children == [inner.loop_id]
    assert inner.body_node_ids < outer.body_node_ids


def test_loop_free_function():
    assert find_loops(fn_of("fn main() { out(1); }")) == []


def test_loop_forest_consistency(corpus_sources):
    for source in corpus_sources.values():
        for fn in parse(source).functions.values():
            loops = {l.loop_id: l for l in find_loops(fn)}
            for info in loops.values():
                for child in info.children:
                    assert loops[child].parent == info.loop_id
                    assert loops[child].depth == info.depth + 1
            # subtree counts over roots partition the forest
            def subtree(lid):
                return 1 + sum(subtree(c) for c in loops[lid].children)

            roots = [l.loop_id for l in loops.values() if l.parent is None]
            assert sum(subtree(r) for r in roots) == len(loops)


# -- counted-loop detection ---------------------------------------------------


def test_constant_for_trip_count():
    fn = fn_of("fn main() { for (i = 0; i < 8; i += 1) { out(i); } }")
    info = detect_counted(fn, 0)
    assert info.const_trip_count == 8
    assert info.induction_var == "i"


@pytest.mark.parametrize(
    "header,expected",
    [
        ("i = 0; i < 8; i += 1", 8),
        ("i = 0; i < 8; i += 3", 3),
        ("i = 5; i < 5; i += 1", 0),
        ("i = 9; i < 5; i += 2", 0),
        ("i = 0; i < 7; i += 2", 4),
    ],
)
def test_const_trip_count_formula(header, expected):
    fn = fn_of(f"fn main() {{ for ({header}) {{ out(1); }} }}")
    assert detect_counted(fn, 0).const_trip_count == expected


def test_canonical_while_with_global_limit():
    fn = fn_of("global g; fn main() { let i = 0; while (i < g) { i = i + 1; } }")
    info = detect_counted(fn, 0)
    assert info is not None
    assert info.const_trip_count is None


def test_canonical_while_with_const_limit():
    fn = fn_of("fn main() { let i = 2; while (i < 10) { out(i); i = i + 2; } }")
    assert detect_counted(fn, 0).const_trip_count == 4


def test_conditional_iv_write_breaks_pattern():
    fn = fn_of(
        "fn main(n) { let i = 0; while (i < n) {"
        " if (i > 2) { i = i + 5; } i = i + 1; } }"
    )
    assert detect_counted(fn, 0) is None


@pytest.mark.parametrize(
    "body",
    [
        "i = i - 1;",  # wrong direction
        "i = i * 2;",  # not an addition
        "out(i);",  # no update at the tail
        "i = i + 1; out(i);",  # update not at the tail
    ],
)
def test_non_canonical_whiles(body):
    fn = fn_of(f"fn main(n) {{ let i = 0; while (i < n) {{ {body} }} }}")
    assert detect_counted(fn, 0) is None


@pytest.mark.parametrize(
    "init,limit,step",
    [(3, 17, 4), (0, 0, 1), (5, 4, 2), (0, 63, 1), (7, 50, 7), (1, 64, 3)],
)
def test_counted_soundness_against_interpretation(init, limit, step):
    """If const_trip_count = N, interpreting the loop runs the body N times,
    for both loop shapes."""
    from forklab.runtime import interpret

    for src in (
        f"fn main() {{ let c = 0; for (i = {init}; i < {limit}; i += {step})"
        " { c = c + 1; } return c; }",
        f"fn main() {{ let c = 0; let i = {init}; while (i < {limit})"
        f" {{ c = c + 1; i = i + {step}; }} return c; }}",
    ):
        program = parse(src)
        info = detect_counted(program.functions["main"], 0)
        value, _ = interpret(program)
        assert value == info.const_trip_count


# -- node census ----------------------------------------------------------------


def test_census_empty_function():
    assert node_census(fn_of("fn main() { }")) == {"Block": 1}


def test_census_global_bound_loop():
    # hand count on the parsed tree: While, cond (BinOp, LocalRead, GlobalRead),
    # body Block, Assign, rhs (BinOp, LocalRead, Const) = 9 nodes
    fn = fn_of("global g; fn foo(n) { let i = n; while (i < g) { i = i + 1; } }", "foo")
    census = node_census(fn, 0)
    assert census == {
        "While": 1,
        "BinOp": 2,
        "LocalRead": 2,
        "GlobalRead": 1,
        "Block": 1,
        "Assign": 1,
        "Const": 1,
    }
    assert sum(census.values()) == 9


def test_census_scope_is_componentwise_subset(corpus_sources):
    for source in corpus_sources.values():
        for fn in parse(source).functions.values():
            whole = node_census(fn)
            assert sum(whole.values()) == len(list(fn.walk()))
            for info in find_loops(fn):
                loop = node_census(fn, info.loop_id)
                assert sum(loop.values()) == info.size
                for kind, count in loop.items():
                    assert whole.get(kind, 0) >= count


def test_census_unknown_loop():
    with pytest.raises(InvalidLoop):
        node_census(fn_of("fn main() { }"), 99)
