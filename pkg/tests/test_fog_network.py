import math

import networkx as nx
import pytest

from conftest import UNIT_LINK, WORKED_EXAMPLE_EDGES, make_network
from utils.errors import ConnectivityError, NetworkValidationError, ParameterError, TopologyError
from utils.fog_network import (
    assign_gateways,
    attach_cloud,
    build_network,
    edge_key,
    fraction_count,
    generate_barabasi_albert,
    parse_network,
    format_network,
    weight_by_hop_count,
)
from utils.schema import DeviceAttrs, DeviceRole, LinkAttrs


def test_edge_key_is_orientation_free():
    assert edge_key(3, 1) == edge_key(1, 3) == (1, 3)


def test_fraction_count_floors():
    assert fraction_count(0.1, 200) == 20
    assert fraction_count(0.1, 19) == 1
    assert fraction_count(0.0, 50) == 0


class TestBuildNetwork:
    def test_rejects_self_loop(self):
        devices = {0: DeviceAttrs(storage_capacity=1), 1: DeviceAttrs(storage_capacity=1)}
        with pytest.raises(NetworkValidationError, match="self-loop"):
            build_network([(0, 0, UNIT_LINK)], devices)

    def test_rejects_duplicate_link(self):
        devices = {0: DeviceAttrs(storage_capacity=1), 1: DeviceAttrs(storage_capacity=1)}
        with pytest.raises(NetworkValidationError, match="duplicate"):
            build_network([(0, 1, UNIT_LINK), (1, 0, UNIT_LINK)], devices)

    def test_rejects_sparse_ids(self):
        devices = {0: DeviceAttrs(storage_capacity=1), 2: DeviceAttrs(storage_capacity=1)}
        with pytest.raises(NetworkValidationError, match="dense"):
            build_network([(0, 2, UNIT_LINK)], devices)

    def test_rejects_dangling_link(self):
        devices = {0: DeviceAttrs(storage_capacity=1), 1: DeviceAttrs(storage_capacity=1)}
        with pytest.raises(NetworkValidationError, match="unknown device 7"):
            build_network([(0, 7, UNIT_LINK)], devices)

    def test_rejects_second_cloud(self):
        devices = {
            0: DeviceAttrs(role=DeviceRole.CLOUD, storage_capacity=math.inf),
            1: DeviceAttrs(role=DeviceRole.CLOUD, storage_capacity=math.inf),
        }
        with pytest.raises(NetworkValidationError, match="cloud"):
            build_network([(0, 1, UNIT_LINK)], devices)


class TestBarabasiAlbert:
    def test_edge_count(self):
        network = generate_barabasi_albert(200, 2, rng_seed=3)
        assert network.n_devices == 200
        assert len(network.links) == 396
        assert nx.is_connected(network.graph)

    def test_tree_when_attaching_one_link(self):
        network = generate_barabasi_albert(5, 1, rng_seed=0)
        assert len(network.links) == 4
        assert nx.is_tree(network.graph)

    def test_same_seed_same_graph(self):
        assert generate_barabasi_albert(50, 2, 7) == generate_barabasi_albert(50, 2, 7)

    def test_rejects_too_few_devices(self):
        with pytest.raises(ParameterError):
            generate_barabasi_albert(2, 2, rng_seed=0)


def test_assign_gateways_marks_fraction():
    network = assign_gateways(generate_barabasi_albert(200, 2, rng_seed=1), 0.1)
    assert len(network.gateways) == 20


def test_assign_gateways_picks_leaves_of_a_star():
    network = make_network([(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (0, 6), (0, 7), (0, 8), (0, 9), (0, 10)])
    gateways = assign_gateways(network, 0.2).gateways
    # every leaf has betweenness 0, ties go to the lowest ids
    assert gateways == (1, 2)


class TestAttachCloud:
    def test_links_most_central_fog_devices(self):
        # path 0-1-2-3-4: betweenness peaks at 2, then 1 and 3
        network = make_network([(0, 1), (1, 2), (2, 3), (3, 4)])
        with_cloud = attach_cloud(network, uplink_count=2)
        assert with_cloud.cloud == 5
        assert with_cloud.role(5) == DeviceRole.CLOUD
        assert math.isinf(with_cloud.capacity(5))
        assert sorted(with_cloud.graph.neighbors(5)) == [1, 2]

    def test_skips_gateways(self):
        network = make_network([(0, 1), (1, 2)], roles={1: DeviceRole.GATEWAY})
        with_cloud = attach_cloud(network, uplink_count=1)
        assert list(with_cloud.graph.neighbors(with_cloud.cloud)) != [1]

    def test_rejects_second_cloud(self, star):
        with pytest.raises(TopologyError):
            attach_cloud(star)

    def test_uses_given_uplink_attributes(self):
        network = make_network([(0, 1), (1, 2)])
        attrs = LinkAttrs(propagation_ms=4.0, bandwidth_bytes_per_ms=10.0)
        with_cloud = attach_cloud(network, uplink_count=1, uplink_attrs=[attrs])
        assert with_cloud.link(1, with_cloud.cloud) == attrs


def test_hop_weights_of_worked_example(worked_example):
    weights = weight_by_hop_count(worked_example, (4, 9))
    expected = {
        (0, 4): 2, (4, 6): 2, (4, 7): 2,
        (0, 6): 4, (6, 7): 4, (0, 7): 4,
        (3, 4): 1, (5, 9): 1, (3, 9): 1, (4, 5): 1,
        (8, 9): 2, (2, 9): 2, (5, 8): 2, (2, 3): 2,
        (2, 8): 3, (1, 2): 3,
    }
    assert weights == expected
    assert len(weights) == len(WORKED_EXAMPLE_EDGES)


def test_hop_weights_count_each_sensor(path_network):
    once = weight_by_hop_count(path_network, (0,))
    twice = weight_by_hop_count(path_network, (0, 0))
    assert once[(3, 4)] == 3
    assert all(twice[key] == 2 * value for key, value in once.items())


def test_hop_weights_without_sensors_are_zero(path_network):
    weights = weight_by_hop_count(path_network, ())
    assert len(weights) == 5
    assert set(weights.values()) == {0.0}


def test_hop_weights_reject_down_gateway(path_network):
    with pytest.raises(ConnectivityError):
        weight_by_hop_count(path_network.with_down([0]), (0,))


def test_down_devices_leave_the_up_graph(path_network):
    failed = path_network.with_down([2])
    assert failed.down_devices == frozenset({2})
    assert 2 not in failed.up_graph
    assert not failed.up_graph.has_edge(1, 2)
    assert path_network.up_devices == frozenset(range(6))


def test_network_text_round_trip():
    network = make_network(
        [(0, 1, LinkAttrs(propagation_ms=1.25, bandwidth_bytes_per_ms=60000)), (1, 2)],
        roles={2: DeviceRole.CLOUD, 0: DeviceRole.GATEWAY},
        capacity={0: 12.0, 1: 7.5},
    ).with_down([1])
    text = format_network(network)
    assert "dev 2 cloud inf" in text
    assert "down 1" in text
    assert parse_network(text) == network
