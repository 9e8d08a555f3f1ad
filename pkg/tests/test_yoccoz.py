from fractions import Fraction as Fr

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twdlab import yoccoz
from twdlab.errors import AmbiguousPullback, InvalidSeed, NoValidGrouping
from twdlab.puzzle import induced_dynamics, return_nest, tree_of_puzzle, validate_markov
from twdlab.twd import minimal_return_chain, validate

BASILICA = [(Fr(1, 3), Fr(2, 3))]
RABBIT = [(Fr(1, 7), Fr(2, 7), Fr(4, 7))]


@pytest.fixture(scope="module")
def basilica():
    return yoccoz.build(BASILICA, 6)


def test_doubling_and_arcs():
    assert yoccoz.double(Fr(2, 3)) == Fr(1, 3)
    assert yoccoz.double(Fr(3, 4)) == Fr(1, 2)
    assert yoccoz.in_arc((Fr(5, 6), Fr(1, 6)), Fr(0))
    assert not yoccoz.in_arc((Fr(1, 6), Fr(5, 6)), Fr(0))


def test_unlinked():
    a = (Fr(1, 3), Fr(2, 3))
    assert yoccoz.unlinked(a, (Fr(1, 6), Fr(5, 6)))
    assert not yoccoz.unlinked(a, (Fr(1, 2), Fr(5, 6)))


@pytest.mark.parametrize(
    "seed",
    [
        [],
        [(Fr(1, 3),)],
        [(Fr(1, 5), Fr(2, 5))],
        [(Fr(1, 3), Fr(2, 3)), (Fr(1, 3), Fr(2, 3))],
    ],
)
def test_invalid_seeds(seed):
    with pytest.raises(InvalidSeed):
        yoccoz.validate_seed(seed)


def test_parse_classes():
    assert yoccoz.parse_classes("1/3,2/3") == ((Fr(1, 3), Fr(2, 3)),)
    assert yoccoz.parse_classes("4/7, 1/7,2/7") == ((Fr(1, 7), Fr(2, 7), Fr(4, 7)),)
    with pytest.raises(InvalidSeed):
        yoccoz.parse_classes("1/0,1/2")
    with pytest.raises(InvalidSeed):
        yoccoz.parse_classes("a,b")


# -- pullback --------------------------------------------------------------------------


def test_basilica_pullbacks():
    c1 = tuple(BASILICA)
    c2 = yoccoz.pullback(c1)
    assert set(c2) == {(Fr(1, 3), Fr(2, 3)), (Fr(1, 6), Fr(5, 6))}
    c3 = yoccoz.pullback(c2)
    assert set(c3) == set(c2) | {(Fr(1, 12), Fr(11, 12)), (Fr(5, 12), Fr(7, 12))}


def test_basilica_depth_four_needs_critical_value():
    levels = yoccoz.build_levels(BASILICA, 3)
    with pytest.raises(AmbiguousPullback):
        yoccoz.pullback(levels[3].classes)
    with pytest.raises(AmbiguousPullback):
        yoccoz.build_levels(BASILICA, 4, strict=True)
    c4 = yoccoz.build_levels(BASILICA, 4)[4].classes
    new = set(c4) - set(levels[3].classes)
    assert new == {
        (Fr(1, 24), Fr(23, 24)),
        (Fr(11, 24), Fr(13, 24)),
        (Fr(5, 24), Fr(7, 24)),
        (Fr(17, 24), Fr(19, 24)),
    }


def test_no_valid_grouping():
    # the seed forces the partner class {1/6, 5/6}, which crosses {1/12, 1/4}
    classes = [(Fr(1, 3), Fr(2, 3)), (Fr(1, 12), Fr(1, 4))]
    with pytest.raises(NoValidGrouping) as info:
        yoccoz.pullback(classes, BASILICA)
    assert info.value.cls == (Fr(1, 3), Fr(2, 3))


def test_linked_input_classes_rejected():
    with pytest.raises(InvalidSeed):
        yoccoz.pullback([(Fr(1, 3), Fr(2, 3)), (Fr(0), Fr(1, 2))], BASILICA)


@pytest.mark.parametrize("seed", [BASILICA, RABBIT])
def test_classes_are_disjoint_unlinked_and_invariant(seed):
    levels = yoccoz.build_levels(seed, 6)
    for d in range(2, 7):
        classes = levels[d].classes
        angles = [a for c in classes for a in c]
        assert len(angles) == len(set(angles))
        for i, a in enumerate(classes):
            for b in classes[i + 1 :]:
                assert yoccoz.unlinked(a, b) and yoccoz.unlinked(b, a)
        images = {tuple(sorted(yoccoz.double(t) for t in c)) for c in classes}
        assert images == set(levels[d - 1].classes)
        assert len(angles) == 2 * len(levels[d - 1].angles)


# -- pieces ----------------------------------------------------------------------------


def test_basilica_counts_and_tree(basilica):
    assert [basilica.counts()[d] for d in range(1, 7)] == [2, 3, 5, 9, 17, 33]
    assert all(basilica.counts()[d] == 1 for d in range(-6, 1))
    kids = {p: len(basilica.children(p)) for p in ("P1.0", "P1.1", "P2.0", "P2.1", "P2.2")}
    assert kids == {"P1.0": 2, "P1.1": 1, "P2.0": 1, "P2.1": 2, "P2.2": 2}


def test_basilica_depth_two_pieces(basilica):
    lv = basilica.levels[2]
    arcs = {p.id: p.arcs for p in lv.pieces}
    assert arcs["P2.0"] == ((Fr(1, 6), Fr(1, 3)), (Fr(2, 3), Fr(5, 6)))
    assert arcs["P2.1"] == ((Fr(5, 6), Fr(1, 6)),)
    assert arcs["P2.2"] == ((Fr(1, 3), Fr(2, 3)),)
    assert lv.critical.id == "P2.0"
    assert yoccoz.critical_piece(lv) == "P2.0"


def test_basilica_dynamics(basilica):
    F = induced_dynamics(basilica)
    assert (F["P2.0"], F["P2.1"], F["P2.2"]) == ("P1.1", "P1.0", "P1.0")
    assert F["P1.0"] == F["P1.1"] == "P0.0"
    assert basilica["P1.0"].exceptional and basilica["P1.1"].exceptional


def test_basilica_markov_and_tree(basilica):
    rep = validate_markov(basilica)
    assert rep.ok, rep.violations
    assert rep.H == 1
    assert rep.exceptional == ["P1.0", "P1.1"]
    tree_rep = validate(tree_of_puzzle(basilica), 6, lo=-6)
    assert tree_rep.ok and tree_rep.H == 1


@pytest.mark.parametrize("seed", [BASILICA, RABBIT, [(Fr(1, 15), Fr(2, 15), Fr(4, 15), Fr(8, 15))]])
def test_face_count_and_unique_critical(seed):
    levels = yoccoz.build_levels(seed, 5)
    for d in range(1, 6):
        lv = levels[d]
        assert len(lv.pieces) == 1 + sum(len(c) - 1 for c in lv.classes)
        assert sum(p.critical for p in lv.pieces) == 1
        # every elementary arc belongs to exactly one piece
        all_arcs = [a for p in lv.pieces for a in p.arcs]
        assert len(all_arcs) == len(set(all_arcs)) == len(lv.angles)


def test_rabbit():
    p = yoccoz.build(RABBIT, 5)
    assert [p.counts()[d] for d in range(1, 6)] == [3, 5, 9, 17, 33]
    assert validate_markov(p).ok


# -- critical nest ---------------------------------------------------------------------


def test_critical_nest_follows_critical_pieces(basilica):
    end = yoccoz.critical_end()
    nest = return_nest(basilica, end, K=3, k_lo=-2)
    chain = minimal_return_chain(tree_of_puzzle(basilica), end, K=3, k_lo=-2)
    assert nest.times == chain.times == (1, 1, 1, 1, 2, 2)
    assert nest.levels == (-2, -1, 0, 1, 3, 5)
    crit = basilica.critical_ids()
    assert all(pid == crit[d] for d, pid in zip(nest.levels, nest.pieces) if d >= 1)


@pytest.mark.parametrize("seed, period", [(RABBIT, 3), ([(Fr(1, 15), Fr(2, 15), Fr(4, 15), Fr(8, 15))], 4)])
def test_critical_return_time_is_the_period(seed, period):
    p = yoccoz.build(seed, 2 * period + 2)
    try:
        nest = return_nest(p, yoccoz.critical_end(), K=4, k_lo=0)
    except Exception as exc:  # window edge
        nest = exc.partial
    assert nest.times[-1] == period


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([BASILICA, RABBIT]), st.integers(2, 5))
def test_every_piece_maps_into_its_parents_image(seed, d):
    levels = yoccoz.build_levels(seed, 5)
    image, parent = yoccoz.piece_dynamics(levels[d], levels[d - 1])
    if d >= 3:
        up_image, _ = yoccoz.piece_dynamics(levels[d - 1], levels[d - 2])
        for pid, q in image.items():
            q_parent = next(x.parent for x in levels[d - 1].pieces if x.id == q)
            assert q_parent == up_image[parent[pid]]


def test_rabbit_depth_two_grouping():
    c2 = yoccoz.pullback(RABBIT)
    assert len(c2) == 2 and all(len(c) == 3 for c in c2)
    assert (Fr(1, 14), Fr(9, 14), Fr(11, 14)) in c2


def test_basilica_depth_three_counts_with_line(basilica):
    small = yoccoz.build(BASILICA, 3)
    assert [small.counts()[d] for d in range(-3, 4)] == [1, 1, 1, 1, 2, 3, 5]


def test_basilica_critical_pieces(basilica):
    lv1 = basilica.levels[1]
    assert lv1.critical.arcs == ((Fr(2, 3), Fr(1, 3)),)
    assert basilica.children("P2.0") == [basilica.critical_ids()[3]]
