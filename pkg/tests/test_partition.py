from __future__ import annotations

import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reinforce.errors import InvalidArgument, InvalidPartition, ParseError
from reinforce.graph import GridSpec, Network, make_grid, make_path
from reinforce.partition import (
    Partition,
    hypercube_partition,
    load_partition,
    path_partition,
    save_partition,
    single_region,
    singletons,
    validate_partition,
)


def crossing_by_coords(spec: GridSpec, h: int) -> tuple[int, int]:
    """(crossing arcs, all arcs) classified by block coordinates, independently of the partition code."""
    net = make_grid(spec)
    cross = 0
    for v, w in net.arcs:
        if tuple(x // h for x in spec.coords(v)) != tuple(x // h for x in spec.coords(w)):
            cross += 1
    return cross, net.m


def test_fig1_style_subcubes():
    spec = GridSpec(6, 2)
    part = hypercube_partition(spec, 2)
    stats = validate_partition(make_grid(spec), part)
    assert (stats.k, stats.R, stats.r) == (9, 4, 4)
    assert stats.cut_arcs == 48 and stats.m == 120
    assert stats.eps_hat == Fraction(24, 60)
    assert stats.all_connected


def test_block_side_extremes():
    spec = GridSpec(4, 2)
    whole = validate_partition(make_grid(spec), hypercube_partition(spec, 4))
    assert whole.k == 1 and whole.eps_hat == 0
    split = validate_partition(make_grid(spec), hypercube_partition(spec, 1))
    assert split.k == 16 and split.eps_hat == 1


def test_block_side_must_divide():
    with pytest.raises(InvalidArgument):
        hypercube_partition(GridSpec(6, 2), 4)


@settings(max_examples=80, deadline=None)
@given(q=st.integers(2, 6), d=st.integers(1, 4), wrap=st.booleans(), data=st.data())
def test_subcube_bound(q, d, wrap, data):
    h = data.draw(st.sampled_from([x for x in range(1, q + 1) if q % x == 0]))
    spec = GridSpec(q, d, wrap)
    part = hypercube_partition(spec, h)
    stats = validate_partition(make_grid(spec), part)
    assert stats.k == (q // h) ** d
    assert all(len(r) == h**d for r in part.regions)
    assert stats.eps_hat <= Fraction(1, h)
    assert (stats.cut_arcs, stats.m) == crossing_by_coords(spec, h)


def test_path_segments():
    part = path_partition(9, 4)
    assert part.regions == ((0, 1, 2, 3), (4, 5, 6, 7), (8,))
    stats = validate_partition(make_path(9), part)
    assert stats.cut_arcs == 2 and stats.eps_hat == Fraction(1, 4)
    assert path_partition(4, 4).k == 1
    six = validate_partition(make_path(6), path_partition(6, 2))
    assert six.k == 3 and six.eps_hat == Fraction(2, 5)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(2, 60), h=st.integers(1, 70))
def test_path_cut_count(n, h):
    stats = validate_partition(make_path(n), path_partition(n, h))
    assert stats.cut_arcs == math.ceil(n / h) - 1


def test_single_region_is_connected():
    stats = validate_partition(make_grid(GridSpec(3, 2)), single_region(9))
    assert stats.eps_hat == 0 and stats.connected == (True,)
    assert validate_partition(make_path(4), singletons(4)).eps_hat == 1


def test_disconnected_region_is_reported_not_rejected():
    stats = validate_partition(make_path(4), Partition([[0, 2], [1, 3]]))
    assert stats.connected == (False, False)


def test_overlap_and_gaps():
    with pytest.raises(InvalidPartition) as err:
        Partition([[0, 1], [1, 2]])
    assert err.value.node == 1
    with pytest.raises(InvalidPartition):
        Partition([[0], []])
    with pytest.raises(InvalidPartition):
        validate_partition(make_path(3), Partition([[0, 1]]))
    with pytest.raises(InvalidPartition):
        validate_partition(make_path(3), Partition([[0, 1], [2, 3]]))


def test_round_trip(tmp_path):
    path = tmp_path / "p.json"
    save_partition(path_partition(9, 4), path)
    assert load_partition(path, 9) == path_partition(9, 4)


def test_missing_node_in_file(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"regions": [[0, 1, 2, 3], [4, 5, 6]]}))
    with pytest.raises(InvalidPartition) as err:
        load_partition(path, 8)
    assert err.value.node == 7


def test_malformed_partition_file(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"regions": [[0, "x"]]}))
    with pytest.raises(ParseError):
        load_partition(path)


def test_external_partition_of_planar_graph(tmp_path):
    # a wheel: hub 0 joined to the 6-cycle 1..6
    edges = [(0, i) for i in range(1, 7)] + [(i, i % 6 + 1) for i in range(1, 7)]
    net = Network(7, [a for u, v in edges for a in ((u, v), (v, u))])
    path = tmp_path / "wheel.json"
    path.write_text(json.dumps({"regions": [[0, 1, 2, 3], [4, 5, 6]]}))
    stats = validate_partition(net, load_partition(path, net.n))
    # crossing edges: 0-4, 0-5, 0-6, 3-4, 6-1
    assert stats.cut_arcs == 10 and stats.m == 24
    assert (stats.R, stats.r, stats.all_connected) == (4, 3, True)
