import logging
import math

import networkx as nx
import numpy as np
from networkx.algorithms.community import kernighan_lin_bisection

from utils.errors import ConnectivityError, ConvergenceError, DeviceLookupError, ParameterError
from utils.fog_network import edge_key
from utils.schema import Bipartition

logger = logging.getLogger(__name__)

EIGEN_TOLERANCE = 1e-8
EIGEN_MAX_ITER = 1000
KL_MAX_ITER = 10
# Centralities are compared after rounding so float noise never beats the tie-breaks
RANK_DECIMALS = 9
_GAIN_EPS = 1e-12


def _require_up(network, *devices):
    for dev in devices:
        if dev not in network.devices:
            raise DeviceLookupError(f"unknown device {dev}")
        if not network.is_up(dev):
            raise DeviceLookupError(f"device {dev} is down")


def shortest_hops(network, src, dst):
    """Links on the shortest path between two up devices, None if unreachable"""
    _require_up(network, src, dst)
    try:
        return nx.shortest_path_length(network.up_graph, src, dst)
    except nx.NetworkXNoPath:
        return None


def shortest_hop_path(network, src, dst):
    """Devices on one shortest hop-path from src to dst (both included), None if unreachable"""
    _require_up(network, src, dst)
    try:
        return nx.shortest_path(network.up_graph, src, dst)
    except nx.NetworkXNoPath:
        return None


def hop_distances(network, src):
    """Hop count from src to every device reachable in the up subgraph"""
    _require_up(network, src)
    return nx.single_source_shortest_path_length(network.up_graph, src)


def _latency_weight(packet_bytes):
    def weight(u, v, data):
        return data["link"].latency_ms(packet_bytes)
    return weight


def shortest_latency(network, src, dst, packet_bytes):
    """Milliseconds along the latency-shortest path, None if unreachable"""
    if packet_bytes <= 0:
        raise ParameterError(f"packet_bytes must be positive, got {packet_bytes}")
    _require_up(network, src, dst)
    try:
        return nx.dijkstra_path_length(network.up_graph, src, dst, weight=_latency_weight(packet_bytes))
    except nx.NetworkXNoPath:
        return None


def latency_distances(network, src, packet_bytes):
    """Latency-shortest distance from src to every reachable up device"""
    if packet_bytes <= 0:
        raise ParameterError(f"packet_bytes must be positive, got {packet_bytes}")
    _require_up(network, src)
    return nx.single_source_dijkstra_path_length(
        network.up_graph, src, weight=_latency_weight(packet_bytes)
    )


def betweenness_subset(network, sources, targets):
    """
    Betweenness restricted to shortest hop-paths between sources and targets

    Each ordered pair (s, t), s != t, contributes sigma_st(v) / sigma_st to
    every intermediate device v; the sum is divided by the number of such
    pairs so values lie in [0, 1].

    Args:
        network (FogNetwork): the network (only up devices are considered)
        sources (Iterable[int]): source devices
        targets (Iterable[int]): target devices

    Returns:
        dict: centrality of every up device
    """
    sources = sorted(set(sources))
    targets = sorted(set(targets))
    if not sources or not targets:
        raise ParameterError("betweenness needs non-empty source and target sets")
    _require_up(network, *sources)
    _require_up(network, *targets)

    pairs = len(sources) * len(targets) - len(set(sources) & set(targets))
    graph = network.up_graph
    if pairs == 0:
        return {dev: 0.0 for dev in graph}

    # The directed copy counts (s, t) and (t, s) separately, with no rescaling
    raw = nx.betweenness_centrality_subset(
        graph.to_directed(), sources=sources, targets=targets, normalized=False
    )
    return {dev: raw.get(dev, 0.0) / pairs for dev in graph}


def betweenness_all(network):
    """Classical betweenness: every up device is both a source and a target"""
    devices = sorted(network.up_devices)
    return betweenness_subset(network, devices, devices)


def _affinity_graph(network, edge_weights):
    graph = nx.Graph()
    graph.add_nodes_from(sorted(network.up_devices))
    for u, v in network.up_graph.edges():
        weight = edge_weights.get(edge_key(u, v), 0.0) if edge_weights is not None else 0.0
        if weight < 0:
            raise ParameterError(f"negative weight {weight} on link {edge_key(u, v)}")
        graph.add_edge(u, v, affinity=1.0 / (1.0 + weight))
    return graph


def eigenvector_centrality(network, edge_weights=None):
    """
    Eigenvector centrality of the up devices on hop-count weighted links

    Weights are distances, so each link contributes affinity 1 / (1 + w).
    Scores are scaled to a maximum of 1.

    Args:
        network (FogNetwork): the network; its up subgraph must be connected
        edge_weights (dict, optional): EdgeWeightMap, zero weights when omitted

    Returns:
        dict: centrality of every up device
    """
    graph = _affinity_graph(network, edge_weights)
    if graph.number_of_nodes() == 0:
        raise ParameterError("eigenvector centrality of an empty network")
    if not nx.is_connected(graph):
        raise ConnectivityError("eigenvector centrality needs a connected up subgraph")
    try:
        scores = nx.eigenvector_centrality(
            graph, max_iter=EIGEN_MAX_ITER, tol=EIGEN_TOLERANCE, weight="affinity"
        )
    except nx.PowerIterationFailedConvergence as e:
        raise ConvergenceError(
            f"eigenvector centrality did not converge in {EIGEN_MAX_ITER} iterations", EIGEN_MAX_ITER
        ) from e
    top = max(scores.values())
    return {dev: scores[dev] / top for dev in graph}


def hops_to_sources(network, sources):
    """
    Total hop count from every device to a multiset of source devices

    Args:
        network (FogNetwork): the network (only up devices are considered)
        sources (Iterable[int]): source devices, repeated once per sensor

    Returns:
        dict: summed hops of every up device, inf when a source cannot reach it
    """
    totals = {dev: 0.0 for dev in network.up_graph}
    for source in sources:
        hops = hop_distances(network, source)
        for dev in totals:
            totals[dev] += hops.get(dev, math.inf)
    return totals


def rank_by_centrality(centrality, candidates, proximity=None):
    """
    Candidates by descending centrality

    Ties go to the device with the lowest proximity value (when given), then
    to the lowest id.
    """
    def key(dev):
        closeness = proximity.get(dev, math.inf) if proximity is not None else 0.0
        return -round(centrality.get(dev, 0.0), RANK_DECIMALS), closeness, dev
    return sorted(candidates, key=key)


def cut_cost(bipartition, edge_weights):
    """Sum of the weights of the links crossing the bipartition"""
    return sum(weight for (u, v), weight in edge_weights.items()
               if (u in bipartition.part_a) != (v in bipartition.part_a))


def _refine_pair_swaps(nodes, weight_matrix, side):
    """Swap the best admissible pair until no swap lowers the cut"""
    max_rounds = len(nodes) ** 2 + 1
    for _ in range(max_rounds):
        same = side[:, None] == side[None, :]
        external = np.where(same, 0.0, weight_matrix).sum(axis=1)
        internal = np.where(same, weight_matrix, 0.0).sum(axis=1)
        gain_per_node = external - internal
        in_a = np.flatnonzero(side == 0)
        in_b = np.flatnonzero(side == 1)
        gains = (gain_per_node[in_a][:, None] + gain_per_node[in_b][None, :]
                 - 2.0 * weight_matrix[np.ix_(in_a, in_b)])
        best = np.unravel_index(np.argmax(gains), gains.shape)
        if gains[best] <= _GAIN_EPS:
            return side
        a, b = in_a[best[0]], in_b[best[1]]
        side[a], side[b] = 1, 0
    logger.warning("pair-swap refinement stopped after %d rounds", max_rounds)
    return side


def kernighan_lin_bipartition(network, edge_weights=None, rng_seed=0):
    """
    Balanced min-cut bisection of the up devices

    The networkx Kernighan-Lin bisection (seeded random balanced start) is
    followed by best-pair swaps until none lowers the cut, so the result is a
    local optimum under pair swaps.

    Args:
        network (FogNetwork): the network
        edge_weights (dict, optional): EdgeWeightMap, unit weights when omitted
        rng_seed (int): seed of the initial balanced split

    Returns:
        Bipartition: part_a holds the lowest device id
    """
    nodes = sorted(network.up_devices)
    if len(nodes) < 2:
        raise ParameterError(f"bipartition needs at least 2 up devices, got {len(nodes)}")

    graph = nx.Graph()
    graph.add_nodes_from(nodes)
    for u, v in network.up_graph.edges():
        weight = 1.0 if edge_weights is None else float(edge_weights.get(edge_key(u, v), 0.0))
        graph.add_edge(u, v, weight=weight)

    half_a, _ = kernighan_lin_bisection(graph, max_iter=KL_MAX_ITER, weight="weight", seed=rng_seed)

    index = {dev: i for i, dev in enumerate(nodes)}
    weight_matrix = nx.to_numpy_array(graph, nodelist=nodes, weight="weight")
    side = np.ones(len(nodes), dtype=np.int8)
    side[[index[dev] for dev in half_a]] = 0
    side = _refine_pair_swaps(nodes, weight_matrix, side)

    part_0 = frozenset(dev for dev in nodes if side[index[dev]] == 0)
    part_1 = frozenset(nodes) - part_0
    if nodes[0] in part_0:
        return Bipartition(part_a=part_0, part_b=part_1)
    return Bipartition(part_a=part_1, part_b=part_0)
