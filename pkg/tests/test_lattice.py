import pytest

from errors import DomainError, IndeterminateFillError
from lattice import (
    Box,
    BondConfig,
    component,
    edge_between,
    external_boundary_of,
    fill,
    fill_vertex_set,
    internal_edge_count,
    merge_boundary_check,
    plaquette_adjacency,
    surface_components,
    vertex_boundary,
)

RING = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0)]


class TestBox:
    def test_counts(self, cube_box, strip_box):
        assert cube_box.n_vertices == 8
        assert cube_box.n_edges == 12
        assert strip_box.n_edges == 17
        assert Box.cube(2, 1).n_edges == 12

    def test_rejects_bad_corners(self):
        with pytest.raises(DomainError):
            Box((0, 0), (-1, 0))
        with pytest.raises(DomainError):
            Box((0,), (3,))
        with pytest.raises(DomainError):
            Box((0, 0), (1, 1, 1))

    def test_index_point_inverse(self, strip_box):
        for i in range(strip_box.n_vertices):
            assert strip_box.index(strip_box.point(i)) == i
        # C order: the last coordinate varies fastest
        assert strip_box.point(0) == (-1, -1)
        assert strip_box.point(1) == (-1, 0)

    def test_edge_ids_cover_box(self, strip_box):
        edges = list(strip_box.edges())
        assert len(set(edges)) == strip_box.n_edges
        assert [strip_box.edge_index(e) for e in edges] == list(range(strip_box.n_edges))

    def test_edge_leaving_box(self, strip_box):
        with pytest.raises(DomainError):
            strip_box.edge_index(((2, 0), 0))

    def test_shell(self, strip_box):
        assert strip_box.on_shell((-1, 0))
        assert not strip_box.on_shell((0, 0))
        assert strip_box.shell_distance((1, 0)) == 1


class TestBoundaries:
    def test_single_vertex(self):
        assert len(vertex_boundary({(0, 0, 0)})) == 6

    def test_adjacent_pair(self):
        for d in (2, 3):
            a = (0,) * d
            b = (1,) + (0,) * (d - 1)
            assert len(vertex_boundary({a, b})) == 4 * d - 2

    def test_edge_between_orients(self):
        assert edge_between((1, 0), (0, 0)) == ((0, 0), 0)
        with pytest.raises(DomainError):
            edge_between((0, 0), (1, 1))

    def test_internal_edges(self):
        square = {(0, 0), (1, 0), (0, 1), (1, 1)}
        assert internal_edge_count(square) == 4

    def test_fill_ring(self):
        ring = set(RING)
        filled = fill_vertex_set(ring)
        assert (0, 0) in filled
        assert len(filled) == 9
        assert len(external_boundary_of(ring)) == 12
        assert len(vertex_boundary(ring)) == 16

    def test_merge_boundary(self):
        assert merge_boundary_check(RING, [(0, 0), (0, 1)])
        assert merge_boundary_check([(0, 0)], [(3, 0), (4, 0)])

    def test_surface_of_point(self):
        comps = surface_components(vertex_boundary({(0, 0, 0)}))
        assert [len(c) for c in comps] == [6]

    def test_plaquette_adjacency(self):
        p = ((0, 0, 0), 0)
        assert plaquette_adjacency(p, ((0, 1, 0), 0))
        assert plaquette_adjacency(p, ((0, 0, 0), 1))
        assert not plaquette_adjacency(p, p)
        assert not plaquette_adjacency(p, ((0, 5, 0), 0))

    def test_surface_of_domino_is_connected(self):
        comps = surface_components(external_boundary_of({(0, 0, 0), (1, 0, 0)}))
        assert [len(c) for c in comps] == [10]

    def test_distant_surfaces_split(self):
        plaqs = vertex_boundary({(0, 0, 0)}) | vertex_boundary({(5, 0, 0)})
        assert [len(c) for c in surface_components(plaqs)] == [6, 6]
        assert surface_components([]) == []


class TestClusters:
    def test_component_and_fill(self):
        box = Box.cube(2, 3)
        config = BondConfig.from_path(box, RING)
        cluster = component(config, (1, 0))
        assert cluster.size == 8
        assert not cluster.touches_box_boundary
        assert (0, 0) not in cluster
        filled = fill(cluster, box)
        assert (0, 0) in filled.filled_vertices
        assert len(filled.external_boundary) == 12
        assert len(filled.graph_boundary) == 16

    def test_fill_refuses_shell_cluster(self):
        box = Box.cube(2, 1)
        config = BondConfig.from_path(box, [(0, 0), (1, 0)])
        with pytest.raises(IndeterminateFillError):
            fill(component(config, (0, 0)), box)

    def test_origin_alone(self, strip_box):
        config = BondConfig(strip_box, [False] * strip_box.n_edges)
        assert component(config, (0, 0)).vertices == frozenset({(0, 0)})


class TestBondConfig:
    def test_bytes_layout(self, cube_box):
        config = BondConfig.from_open_edges(cube_box, [((0, 0, 0), 0)], seed=7, stream_id=2, p=0.25)
        data = config.to_bytes()
        assert data[:4] == b"PCZ1"
        assert len(data) == 60
        back = BondConfig.from_bytes(data)
        assert back == config
        assert (back.seed, back.stream_id, back.p) == (7, 2, 0.25)

    def test_bad_magic(self, cube_box):
        data = BondConfig(cube_box, [True] * 12).to_bytes()
        with pytest.raises(DomainError):
            BondConfig.from_bytes(b"XXXX" + data[4:])

    def test_code(self, strip_box):
        config = BondConfig.from_open_edges(strip_box, [strip_box.edge(0), strip_box.edge(5)])
        assert config.code() == 1 + 32
        assert BondConfig.from_code(strip_box, config.code()) == config

    def test_wrong_bit_count(self, cube_box):
        with pytest.raises(DomainError):
            BondConfig(cube_box, [True] * 11)

    def test_bits_are_frozen(self, cube_box):
        config = BondConfig(cube_box, [False] * 12)
        with pytest.raises(ValueError):
            config.bits[0] = True
