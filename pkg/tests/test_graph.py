from __future__ import annotations

import itertools
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reinforce.errors import InvalidArgument, ParseError
from reinforce.graph import GridSpec, Network, load_network, make_grid, make_path, save_network


def brute_force_adjacencies(q: int, d: int, wrap: bool) -> set[frozenset]:
    """Undirected adjacencies found by scanning all coordinate pairs."""
    points = list(itertools.product(range(q), repeat=d))
    ident = {pt: sum(x * q**i for i, x in enumerate(pt)) for pt in points}
    found = set()
    for a, b in itertools.combinations(points, 2):
        diff = [i for i in range(d) if a[i] != b[i]]
        if len(diff) != 1:
            continue
        gap = abs(a[diff[0]] - b[diff[0]])
        if gap == 1 or (wrap and gap == q - 1):
            found.add(frozenset((ident[a], ident[b])))
    return found


def test_path_of_nine_has_eight_arcs():
    net = make_path(9)
    assert net.n == 9 and net.m == 8


def test_small_paths():
    assert make_path(2).arcs == ((0, 1),)
    assert make_path(5).arcs == ((0, 1), (1, 2), (2, 3), (3, 4))
    with pytest.raises(InvalidArgument):
        make_path(1)


def test_grid_six_by_six():
    net = make_grid(GridSpec(6, 2))
    assert net.n == 36
    assert net.m == 120
    assert len({frozenset(a) for a in net.arcs}) == 60


def test_degenerate_grid_and_three_cycle():
    assert make_grid(GridSpec(2, 1)).arcs == ((0, 1), (1, 0))
    cycle = make_grid(GridSpec(3, 1, wraparound=True))
    assert cycle.m == 6
    assert all(cycle.has_arc(v, (v + 1) % 3) and cycle.has_arc((v + 1) % 3, v) for v in range(3))


def test_grid_spec_rejects_bad_shapes():
    with pytest.raises(InvalidArgument):
        GridSpec(1, 2)
    with pytest.raises(InvalidArgument):
        GridSpec(3, 0)


@settings(max_examples=60, deadline=None)
@given(q=st.integers(2, 5), d=st.integers(1, 4), wrap=st.booleans())
def test_grid_matches_brute_force_scan(q, d, wrap):
    net = make_grid(GridSpec(q, d, wrap))
    expected = brute_force_adjacencies(q, d, wrap)
    assert {frozenset(a) for a in net.arcs} == expected
    assert net.m == 2 * len(expected)
    if not wrap:
        assert len(expected) == d * (q - 1) * q ** (d - 1)


@settings(max_examples=50, deadline=None)
@given(q=st.integers(2, 7), d=st.integers(1, 4), data=st.data())
def test_coords_round_trip(q, d, data):
    spec = GridSpec(q, d)
    v = data.draw(st.integers(0, spec.n - 1))
    assert spec.node_id(spec.coords(v)) == v


def test_network_rejects_bad_arcs():
    with pytest.raises(InvalidArgument):
        Network(3, [(0, 0)])
    with pytest.raises(InvalidArgument):
        Network(3, [(0, 1), (0, 1)])
    with pytest.raises(InvalidArgument):
        Network(3, [(0, 3)])


def test_arc_order_does_not_matter():
    assert Network(3, [(1, 2), (0, 1)]) == Network(3, [(0, 1), (1, 2)])


def test_save_load_round_trip(tmp_path):
    path = tmp_path / "g.json"
    save_network(make_path(9), path)
    assert load_network(path) == make_path(9)


def test_load_rejects_self_loop(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"n": 3, "arcs": [[0, 0]]}))
    with pytest.raises(ParseError, match="arcs\\[0\\]"):
        load_network(path)


def test_load_small_path(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"n": 3, "arcs": [[0, 1], [1, 2]]}))
    assert load_network(path) == make_path(3)


@pytest.mark.parametrize(
    "payload",
    [
        "[]",
        '{"n": 3}',
        '{"n": -1, "arcs": []}',
        '{"n": 3, "arcs": [[0, 5]]}',
        '{"n": 3, "arcs": [[0, 1], [0, 1]]}',
        '{"n": 3, "arcs": [[0, "1"]]}',
        "{not json",
    ],
)
def test_load_rejects_malformed_files(tmp_path, payload):
    path = tmp_path / "g.json"
    path.write_text(payload)
    with pytest.raises(ParseError):
        load_network(path)
