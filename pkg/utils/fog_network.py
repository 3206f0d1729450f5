import logging
import math
from types import MappingProxyType

import networkx as nx

from utils.errors import (
    ConfigError,
    ConnectivityError,
    NetworkValidationError,
    ParameterError,
    TopologyError,
)
from utils.schema import CLOUD_CAPACITY, DeviceAttrs, DeviceRole, LinkAttrs

logger = logging.getLogger(__name__)

DEFAULT_CLOUD_UPLINKS = 3
DEFAULT_BA_ATTACHMENT = 2
# Tolerance when turning a fraction of a device count into a whole count
_FLOOR_EPS = 1e-9


def edge_key(u, v):
    """Canonical key of an undirected link"""
    return (u, v) if u < v else (v, u)


def fraction_count(fraction, total):
    return int(math.floor(fraction * total + _FLOOR_EPS))


class FogNetwork:
    def __init__(self, devices, links, up_devices=None):
        """
        Physical layer: devices, links and the set of devices currently up

        Instances are immutable; use build_network to get validation, and the
        with_* methods to derive modified copies.

        Args:
            devices (Mapping[int, DeviceAttrs]): attributes per device id
            links (Mapping[tuple, LinkAttrs]): attributes per (u, v) link
            up_devices (Iterable[int], optional): operational devices, all by default
        """
        self._devices = MappingProxyType(dict(sorted(devices.items())))
        self._links = MappingProxyType(
            dict(sorted((edge_key(u, v), attrs) for (u, v), attrs in links.items()))
        )
        self._up = frozenset(self._devices) if up_devices is None else frozenset(up_devices)

        graph = nx.Graph()
        graph.add_nodes_from(self._devices)
        for (u, v), attrs in self._links.items():
            graph.add_edge(u, v, link=attrs)
        self._graph = nx.freeze(graph)
        self._up_graph = None
        self._cloud = next(
            (dev for dev, attrs in self._devices.items() if attrs.role == DeviceRole.CLOUD), None
        )

    @property
    def devices(self):
        return self._devices

    @property
    def links(self):
        return self._links

    @property
    def up_devices(self):
        return self._up

    @property
    def down_devices(self):
        return frozenset(self._devices) - self._up

    @property
    def graph(self):
        return self._graph

    @property
    def up_graph(self):
        """Read-only view without the down devices and their incident links"""
        if self._up_graph is None:
            if len(self._up) == len(self._devices):
                self._up_graph = self._graph
            else:
                self._up_graph = self._graph.subgraph(sorted(self._up))
        return self._up_graph

    @property
    def n_devices(self):
        return len(self._devices)

    @property
    def cloud(self):
        return self._cloud

    @property
    def gateways(self):
        return tuple(dev for dev, attrs in self._devices.items() if attrs.role == DeviceRole.GATEWAY)

    @property
    def storage_devices(self):
        """Every device but the cloud: the fog devices and the gateways"""
        return tuple(dev for dev, attrs in self._devices.items() if attrs.role != DeviceRole.CLOUD)

    def role(self, device):
        return self._devices[device].role

    def capacity(self, device):
        return self._devices[device].storage_capacity

    def link(self, u, v):
        return self._links[edge_key(u, v)]

    def is_up(self, device):
        return device in self._up

    def require_cloud(self):
        if self._cloud is None:
            raise TopologyError("network has no cloud device")
        return self._cloud

    def with_devices(self, updates):
        """Copy with some device attributes replaced"""
        devices = dict(self._devices)
        devices.update(updates)
        return FogNetwork(devices, self._links, self._up | (frozenset(updates) - frozenset(self._devices)))

    def with_links(self, updates):
        """Copy with some links added or their attributes replaced"""
        links = dict(self._links)
        for (u, v), attrs in updates.items():
            links[edge_key(u, v)] = attrs
        return FogNetwork(self._devices, links, self._up)

    def with_down(self, down_devices):
        """Copy where down_devices (and only those) are not operational"""
        down = frozenset(down_devices)
        unknown = down - frozenset(self._devices)
        if unknown:
            raise NetworkValidationError(f"cannot fail unknown devices {sorted(unknown)}")
        return FogNetwork(self._devices, self._links, frozenset(self._devices) - down)

    def __eq__(self, other):
        if not isinstance(other, FogNetwork):
            return NotImplemented
        return (dict(self._devices) == dict(other._devices)
                and dict(self._links) == dict(other._links)
                and self._up == other._up)

    def __repr__(self):
        return (f"FogNetwork(devices={len(self._devices)}, links={len(self._links)}, "
                f"down={len(self._devices) - len(self._up)})")


def build_network(edge_list, device_attrs):
    """
    Validate raw devices and links and assemble a FogNetwork

    Args:
        edge_list (list): (u, v, LinkAttrs) triples
        device_attrs (dict): DeviceAttrs per device id

    Returns:
        FogNetwork: the validated network
    """
    ids = sorted(device_attrs)
    if ids != list(range(len(ids))):
        missing = sorted(set(range(len(ids))) - set(ids))
        raise NetworkValidationError(
            f"device ids must be dense 0..{len(ids) - 1}; offending ids: {missing or ids}"
        )
    clouds = [dev for dev in ids if device_attrs[dev].role == DeviceRole.CLOUD]
    if len(clouds) > 1:
        raise NetworkValidationError(f"more than one cloud device: {clouds}")

    links = {}
    for u, v, attrs in edge_list:
        if u == v:
            raise NetworkValidationError(f"self-loop on device {u}")
        for dev in (u, v):
            if dev not in device_attrs:
                raise NetworkValidationError(f"link ({u}, {v}) references unknown device {dev}")
        key = edge_key(u, v)
        if key in links:
            raise NetworkValidationError(f"duplicate link {key}")
        links[key] = attrs
    return FogNetwork(device_attrs, links)


def generate_barabasi_albert(n_devices, attach_m, rng_seed, link_attrs=None, capacity=0.0):
    """
    Scale-free topology of fog devices by preferential attachment

    Every device and link gets the same placeholder attributes; scenario
    generation redraws them.

    Args:
        n_devices (int): number of fog devices
        attach_m (int): links each new device attaches with
        rng_seed (int): seed of the generator
        link_attrs (LinkAttrs, optional): attributes of every link
        capacity (float): storage capacity of every device

    Returns:
        FogNetwork: connected network with n_devices fog devices
    """
    if attach_m < 1 or n_devices <= attach_m:
        raise ParameterError(
            f"Barabasi-Albert needs n_devices > attach_m >= 1 (got n={n_devices}, m={attach_m})"
        )
    link_attrs = link_attrs or LinkAttrs(propagation_ms=1.0, bandwidth_bytes_per_ms=1.0)
    graph = nx.barabasi_albert_graph(n_devices, attach_m, seed=rng_seed)
    devices = {dev: DeviceAttrs(storage_capacity=capacity) for dev in range(n_devices)}
    return build_network([(u, v, link_attrs) for u, v in graph.edges()], devices)


def assign_gateways(network, gateway_fraction):
    """Mark the lowest-betweenness fraction of the storage devices as gateways"""
    from utils.graph_analysis import betweenness_all

    if not 0 < gateway_fraction < 1:
        raise ParameterError(f"gateway_fraction must lie in (0, 1), got {gateway_fraction}")
    candidates = network.storage_devices
    count = fraction_count(gateway_fraction, len(candidates))
    centrality = betweenness_all(network)
    ranked = sorted(candidates, key=lambda dev: (round(centrality.get(dev, 0.0), 9), dev))
    chosen = ranked[:count]
    logger.debug("gateways: %s", chosen)
    return network.with_devices({
        dev: network.devices[dev].model_copy(update={"role": DeviceRole.GATEWAY})
        for dev in chosen
    })


def attach_cloud(network, uplink_count=DEFAULT_CLOUD_UPLINKS, uplink_attrs=None):
    """
    Add the cloud provider linked to the highest-betweenness fog devices

    Args:
        network (FogNetwork): network without a cloud
        uplink_count (int): number of fog devices the cloud links to
        uplink_attrs (LinkAttrs | Sequence[LinkAttrs]): one value for every
            uplink, or one per uplink in ranking order

    Returns:
        FogNetwork: network with one extra device of role cloud
    """
    from utils.graph_analysis import betweenness_all

    if network.cloud is not None:
        raise TopologyError(f"network already has a cloud (device {network.cloud})")
    if uplink_count < 1:
        raise ParameterError(f"uplink_count must be at least 1, got {uplink_count}")
    eligible = [dev for dev, attrs in network.devices.items()
                if attrs.role == DeviceRole.FOG and network.is_up(dev)]
    if not eligible:
        raise TopologyError("no non-gateway fog device available for the cloud uplinks")

    centrality = betweenness_all(network)
    ranked = sorted(eligible, key=lambda dev: (-round(centrality.get(dev, 0.0), 9), dev))
    targets = ranked[:uplink_count]
    if len(targets) < uplink_count:
        logger.warning("only %d devices eligible for %d cloud uplinks", len(targets), uplink_count)

    if uplink_attrs is None:
        uplink_attrs = LinkAttrs(propagation_ms=1.0, bandwidth_bytes_per_ms=1.0)
    if isinstance(uplink_attrs, LinkAttrs):
        uplink_attrs = [uplink_attrs] * len(targets)
    if len(uplink_attrs) < len(targets):
        raise ParameterError(f"{len(targets)} uplinks need as many LinkAttrs, got {len(uplink_attrs)}")

    cloud = network.n_devices
    devices = dict(network.devices)
    devices[cloud] = DeviceAttrs(role=DeviceRole.CLOUD, storage_capacity=CLOUD_CAPACITY)
    links = dict(network.links)
    for target, attrs in zip(targets, uplink_attrs):
        links[edge_key(cloud, target)] = attrs
    return FogNetwork(devices, links, network.up_devices | {cloud})


def weight_by_hop_count(network, sensor_gateways):
    """
    Weight every up link by its hop distance to a file's sensors

    weight(u, v) sums, over each sensor (gateways repeated once per sensor),
    min(hops(u, g), hops(v, g)) in the up subgraph.

    Args:
        network (FogNetwork): the network
        sensor_gateways (Iterable[int]): the gateway of each sensor

    Returns:
        dict: EdgeWeightMap keyed by edge_key(u, v)
    """
    graph = network.up_graph
    weights = {edge_key(u, v): 0.0 for u, v in graph.edges()}
    multiplicity = {}
    for gateway in sensor_gateways:
        multiplicity[gateway] = multiplicity.get(gateway, 0) + 1

    for gateway, count in sorted(multiplicity.items()):
        if gateway not in graph:
            raise ConnectivityError(f"sensor gateway {gateway} is down or unknown")
        hops = nx.single_source_shortest_path_length(graph, gateway)
        for key in weights:
            u, v = key
            if u not in hops and v not in hops:
                raise ConnectivityError(f"link {key} is unreachable from sensor gateway {gateway}")
            weights[key] += count * min(hops.get(u, math.inf), hops.get(v, math.inf))
    return weights


def _format_number(value):
    if math.isinf(value):
        return "inf"
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def format_network(network):
    """Interchange text of a network (see README for the format)"""
    lines = [f"devices {network.n_devices}"]
    for dev, attrs in network.devices.items():
        lines.append(f"dev {dev} {attrs.role.value} {_format_number(attrs.storage_capacity)}")
    for (u, v), attrs in network.links.items():
        lines.append(f"link {u} {v} {_format_number(attrs.propagation_ms)} "
                     f"{_format_number(attrs.bandwidth_bytes_per_ms)}")
    for dev in sorted(network.down_devices):
        lines.append(f"down {dev}")
    return "\n".join(lines) + "\n"


def parse_network_lines(lines):
    """Parse network records; lines belonging to other sections are returned untouched"""
    expected = None
    devices = {}
    edges = []
    down = []
    rest = []
    for number, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        try:
            if fields[0] == "devices":
                expected = int(fields[1])
            elif fields[0] == "dev":
                devices[int(fields[1])] = DeviceAttrs(
                    role=DeviceRole(fields[2]), storage_capacity=float(fields[3])
                )
            elif fields[0] == "link":
                edges.append((int(fields[1]), int(fields[2]), LinkAttrs(
                    propagation_ms=float(fields[3]), bandwidth_bytes_per_ms=float(fields[4]),
                )))
            elif fields[0] == "down":
                down.append(int(fields[1]))
            else:
                rest.append(raw)
        except (IndexError, ValueError) as e:
            raise ConfigError(f"line {number}: cannot parse {line!r}: {e}") from e

    if expected is None:
        raise ConfigError("missing 'devices <n>' header")
    if expected != len(devices):
        raise ConfigError(f"header announces {expected} devices, found {len(devices)}")
    network = build_network(edges, devices)
    if down:
        network = network.with_down(down)
    return network, rest


def parse_network(text):
    network, rest = parse_network_lines(text.splitlines())
    if rest:
        raise ConfigError(f"unexpected line in network file: {rest[0].strip()!r}")
    return network


def write_network(network, path):
    with open(path, "w") as f:
        f.write(format_network(network))
    return path


def read_network(path):
    with open(path, "r") as f:
        return parse_network(f.read())
