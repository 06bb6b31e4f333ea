import logging

import numpy as np
import pytest
import sympy
from hypothesis import given

from mtdc_droop.errors import DisconnectedGridError, ValidationError
from mtdc_droop.grid import GridTopology, Line, build_laplacian, connectivity_check, incidence_matrix

from conftest import connected_topologies


def test_three_area_laplacian_diagonal(three_area_topology):
    lap = build_laplacian(three_area_topology)
    assert np.allclose(np.diag(lap.laplacian), [1 / 0.0015 + 1 / 0.0045, 2 / 0.0015, 1 / 0.0045 + 1 / 0.0015])
    assert np.allclose(np.diag(lap.laplacian), [888.8889, 1333.3333, 888.8889], atol=1e-4)
    assert abs(lap.eigenvalues[0]) < 1e-9


def test_k3_spectrum_matches_characteristic_polynomial():
    topo = GridTopology.from_edges(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)])
    lap = build_laplacian(topo)
    lam = sympy.symbols("lam")
    L = sympy.Matrix(lap.laplacian.round().astype(int))
    roots = sympy.roots((L - lam * sympy.eye(3)).det(), lam)
    expected = sorted(float(r) for r, mult in roots.items() for _ in range(mult))
    assert expected == [0.0, 3.0, 3.0]
    assert np.allclose(lap.eigenvalues, expected, atol=1e-12)


def test_two_nodes_single_line():
    lap = build_laplacian(GridTopology.from_edges(2, [(0, 1, 1.0)]))
    assert np.array_equal(lap.laplacian, [[1.0, -1.0], [-1.0, 1.0]])
    assert np.allclose(lap.eigenvalues, [0.0, 2.0], atol=1e-14)
    assert lap.algebraic_connectivity == pytest.approx(2.0)


def test_connectivity_examples(three_area_topology):
    ok, _ = connectivity_check(three_area_topology)
    assert ok
    ok, labels = connectivity_check(GridTopology(2, ()))
    assert not ok and labels[0] != labels[1]
    path = GridTopology.from_edges(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1)])
    assert connectivity_check(path)[0]


def test_disconnected_grid_names_components():
    topo = GridTopology.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
    with pytest.raises(DisconnectedGridError) as exc:
        build_laplacian(topo)
    assert exc.value.components == [[0, 1], [2, 3]]
    assert "{1, 2}" in str(exc.value) and "{3, 4}" in str(exc.value)


@pytest.mark.parametrize("lines, fragment", [
    ((Line(0, 1, 0.0),), "line 1-2: resistance"),
    ((Line(0, 1, -1.0),), "line 1-2: resistance"),
    ((Line(1, 1, 1.0),), "self-loop"),
    ((Line(0, 1, 1.0), Line(1, 0, 2.0)), "duplicate"),
    ((Line(0, 5, 1.0),), "out of range"),
])
def test_invalid_lines(lines, fragment):
    with pytest.raises(ValidationError, match=fragment):
        GridTopology(3, lines)


def test_reactances_are_logged_and_ignored(caplog):
    with_x = GridTopology(2, (Line(0, 1, 0.5, reactance=0.3),))
    without = GridTopology(2, (Line(0, 1, 0.5),))
    with caplog.at_level(logging.INFO, logger="mtdc_droop.grid"):
        a = build_laplacian(with_x)
    assert "reactances" in caplog.text
    assert np.array_equal(a.laplacian, build_laplacian(without).laplacian)


@given(connected_topologies(n_max=20))
def test_laplacian_properties(topo):
    lap = build_laplacian(topo)
    L = lap.laplacian
    scale = np.max(np.abs(L))
    assert np.max(np.abs(L.sum(axis=1))) < 1e-12 * max(1.0, scale)
    assert np.array_equal(L, L.T)
    assert lap.eigenvalues[0] > -1e-10 * max(1.0, scale)
    assert np.all(np.diff(lap.eigenvalues) >= 0)
    V = lap.eigenvectors
    assert np.max(np.abs(V.T @ V - np.eye(topo.n_nodes))) < 1e-9
    rebuilt = lap.incidence @ np.diag(lap.weights) @ lap.incidence.T
    assert np.max(np.abs(rebuilt - L)) <= 1e-12 * max(1.0, scale)
    assert set(np.unique(lap.incidence)) <= {-1.0, 0.0, 1.0}
    v1 = V[:, 0] * np.sign(V[0, 0])
    assert np.allclose(v1, 1 / np.sqrt(topo.n_nodes), atol=1e-8)


@given(connected_topologies(n_max=12))
def test_connectivity_iff_positive_fiedler_value(topo):
    lap = build_laplacian(topo)
    assert connectivity_check(topo)[0]
    assert lap.algebraic_connectivity > 0
    # dropping every line at node 0 isolates it
    cut = GridTopology(topo.n_nodes, tuple(ln for ln in topo.lines if 0 not in (ln.i, ln.j)))
    assert not connectivity_check(cut)[0]
    B = incidence_matrix(cut)
    lam = np.linalg.eigvalsh((B * cut.conductances) @ B.T) if cut.lines else np.zeros(cut.n_nodes)
    assert lam[1] < 1e-9 * max(1.0, np.max(np.abs(lam)))
