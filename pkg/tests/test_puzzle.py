import json
import random

import pytest

from twdlab.errors import BudgetExhausted, InvalidPuzzle, UnresolvableExceptional
from twdlab.models import LINE, BinaryModel, parse_end, random_end
from twdlab.puzzle import (
    AbstractPuzzle,
    PuzzlePiece,
    chain_puzzle,
    induced_dynamics,
    load_puzzle,
    puzzle_from_model,
    random_puzzle,
    return_nest,
    shift_of,
    tree_of_puzzle,
    validate_markov,
)
from twdlab.twd import End, Vertex, minimal_return_chain, validate, verify_theorem


def nest_or_partial(puzzle, end, **kw):
    try:
        return return_nest(puzzle, end, **kw)
    except BudgetExhausted as exc:
        return exc.partial


def chain_or_partial(model, end, **kw):
    try:
        return minimal_return_chain(model, end, **kw)
    except BudgetExhausted as exc:
        return exc.partial


def small_puzzle(hint="A1"):
    """Root R below a top piece T; depth 1 pieces A, B (exceptional); depth 2 below them."""
    pieces = [
        PuzzlePiece("T", -1),
        PuzzlePiece("R", 0, "T", image="T"),
        PuzzlePiece("A", 1, "R", exceptional=True, contained_in="R"),
        PuzzlePiece("B", 1, "R", exceptional=True, contained_in="R"),
        PuzzlePiece("A1", 2, "A", image="A"),
        PuzzlePiece("A2", 2, "A", image="B"),
        PuzzlePiece("B1", 2, "B", image="A"),
    ]
    return AbstractPuzzle(pieces, name="small")


# -- Markov properties -------------------------------------------------------------------


def test_small_puzzle_is_clean():
    rep = validate_markov(small_puzzle())
    assert rep.ok, rep.violations
    assert rep.H == 1
    assert rep.exceptional == ["A", "B"]


def test_orphan_exceptional_pieces():
    pieces = [PuzzlePiece("E0", 0, exceptional=True)]
    for d in range(1, 4):
        pieces.append(PuzzlePiece(f"E{d}", d, f"E{d - 1}", exceptional=True))
    rep = validate_markov(AbstractPuzzle(pieces))
    assert not rep.ok
    assert {v["property"] for v in rep.violations} == {"3'"}
    assert {v["piece"] for v in rep.violations} == {f"E{d}" for d in range(4)}


def test_wrong_parent_of_image():
    pieces = [
        PuzzlePiece("R", 0),
        PuzzlePiece("A", 1, "R", image="R"),
        PuzzlePiece("B", 1, "R", image="R"),
        PuzzlePiece("A1", 2, "A", image="A"),
        PuzzlePiece("B1", 2, "B", image="A"),
        PuzzlePiece("C", 0),
        PuzzlePiece("C1", 1, "C", image="R"),
        PuzzlePiece("C2", 2, "C1", image="A1"),
    ]
    rep = validate_markov(AbstractPuzzle(pieces, line_above=False))
    props = {(v["property"], v["piece"]) for v in rep.violations}
    assert ("1", "C") in props or ("1", "R") in props
    assert ("3", "C2") in props


def test_bad_parent_and_depth():
    pieces = [PuzzlePiece("R", 0), PuzzlePiece("A", 1, "R", image="R"), PuzzlePiece("X", 2, "R", image="A")]
    rep = validate_markov(AbstractPuzzle(pieces))
    assert {"property": "2", "piece": "X", "detail": "parent 'R' is at depth 0"} in rep.violations


def test_duplicate_ids_rejected():
    with pytest.raises(InvalidPuzzle):
        AbstractPuzzle([PuzzlePiece("R", 0), PuzzlePiece("R", 1, "R")])
    with pytest.raises(InvalidPuzzle):
        AbstractPuzzle([])


# -- induced dynamics --------------------------------------------------------------------


def test_declared_images_pass_through():
    F = induced_dynamics(small_puzzle())
    assert F["A1"] == "A" and F["A2"] == "B" and F["B1"] == "A"


def test_forced_child_resolution():
    pieces = [
        PuzzlePiece("T", -1),
        PuzzlePiece("R", 0, "T", image="T"),
        PuzzlePiece("E", 1, "R", exceptional=True),
        PuzzlePiece("E1", 2, "E", image="E"),
    ]
    puzzle = AbstractPuzzle(pieces)
    # R -> T and T has the single child R, so E is forced onto R
    assert puzzle.children("T") == ["R"]
    assert induced_dynamics(puzzle)["E"] == "R"
    assert validate_markov(puzzle).ok


def test_exceptional_depth_one_resolves_through_hint():
    F = induced_dynamics(small_puzzle())
    assert F["A"] == "R" and F["B"] == "R"


def test_unresolvable_without_hint():
    pieces = [
        PuzzlePiece("T", -1),
        PuzzlePiece("R", 0, "T", image="T"),
        PuzzlePiece("S", 0, "T", image="T"),
        PuzzlePiece("E", 1, "R", exceptional=True),
    ]
    with pytest.raises(UnresolvableExceptional) as info:
        induced_dynamics(AbstractPuzzle(pieces))
    assert info.value.piece == "E"
    rep = validate_markov(AbstractPuzzle(pieces))
    assert rep.violations[0]["piece"] == "E"


def test_shuffled_input_gives_same_dynamics():
    rng = random.Random(3)
    for _ in range(20):
        p = random_puzzle(rng, depth=5, exceptional_depths=(1, 2))
        pieces = list(p)
        rng.shuffle(pieces)
        q = AbstractPuzzle(pieces, (p.lo, p.hi))
        assert induced_dynamics(q) == induced_dynamics(p)


# -- derived trees -----------------------------------------------------------------------


def test_binary_puzzle_is_isomorphic_to_binary_model():
    model = BinaryModel()
    puzzle = puzzle_from_model(model, -3, 7)
    assert validate_markov(puzzle).ok
    tree = tree_of_puzzle(puzzle)
    assert validate(tree, 7, lo=-3).ok
    to_model = lambda v: Vertex(v.level, "" if v.id == LINE else v.id.split(":", 1)[1])  # noqa: E731
    for l in range(-3, 8):
        vs = tree.level_vertices(l)
        assert sorted(map(to_model, vs)) == sorted(model.level_vertices(l))
        for v in vs:
            assert to_model(tree.F(v)) == model.F(to_model(v))
            if l > -3:
                assert to_model(tree.parent(v)) == model.parent(to_model(v))
            if l < 7:
                assert [to_model(c) for c in tree.children(v)] == model.children(to_model(v))


def test_chain_puzzle_is_a_line():
    puzzle = chain_puzzle(-3, 10)
    tree = tree_of_puzzle(puzzle)
    assert all(len(tree.level_vertices(l)) == 1 for l in range(-3, 11))
    nest = return_nest(puzzle, End.periodic("0"), K=8, k_lo=-2)
    assert set(nest.times) == {1}
    chain = minimal_return_chain(tree, End.periodic("0"), K=8, k_lo=-2)
    assert chain.times == nest.times


def test_tree_of_small_puzzle():
    tree = tree_of_puzzle(small_puzzle())
    rep = validate(tree, 2, lo=-1)
    assert rep.ok and rep.H == 1
    assert tree.F(Vertex(2, "A2")) == Vertex(1, "B")


def test_shift_must_be_uniform():
    pieces = [
        PuzzlePiece("T", -1),
        PuzzlePiece("R", 0, "T", image="T"),
        PuzzlePiece("A", 1, "R", image="T"),
    ]
    with pytest.raises(InvalidPuzzle):
        shift_of(AbstractPuzzle(pieces))


# -- return nests and the dictionary -------------------------------------------------------


def test_dictionary_binary_fibonacci():
    puzzle = puzzle_from_model(BinaryModel(), -3, 12)
    end = parse_end("fib")
    nest = nest_or_partial(puzzle, end, K=8, k_lo=-2)
    chain = chain_or_partial(tree_of_puzzle(puzzle), end, K=8, k_lo=-2)
    assert nest.times == chain.times
    assert nest.levels == chain.levels
    assert nest.levels[2:] == (0, 1, 3, 6, 11)
    assert nest.times[2:] == (1, 1, 2, 3, 5)


def test_dictionary_random_puzzles():
    rng = random.Random(8)
    for i in range(30):
        puzzle = random_puzzle(rng, depth=7, exceptional_depths=(1,) if i % 2 else (1, 2))
        assert validate_markov(puzzle).ok
        end = random_end(rng)
        nest = nest_or_partial(puzzle, end, K=12, k_lo=-2)
        chain = chain_or_partial(tree_of_puzzle(puzzle), end, K=12, k_lo=-2)
        assert nest.times == chain.times and nest.levels == chain.levels


def test_rooted_nest_normalization():
    rng = random.Random(4)
    for _ in range(20):
        puzzle = random_puzzle(rng, depth=6)
        nest = nest_or_partial(puzzle, random_end(rng), K=8, k_lo=-2)
        chain = chain_or_partial(tree_of_puzzle(puzzle), random_end(random.Random(0)), K=8, k_lo=-2)
        assert nest.times[:4] == (1, 1, 1, 1)
        assert chain.times[:4] == (1, 1, 1, 1)
        verify_theorem(chain)


def test_json_round_trip(tmp_path):
    p = random_puzzle(random.Random(6), depth=4, exceptional_depths=(1, 2))
    path = tmp_path / "p.json"
    path.write_text(json.dumps(p.to_json()))
    q = load_puzzle(path)
    assert q.to_json() == p.to_json()
    assert induced_dynamics(q) == induced_dynamics(p)
