import logging
import math

import numpy as np

from utils.errors import ConnectivityError, ParameterError
from utils.fog_network import fraction_count
from utils.graph_analysis import hop_distances, latency_distances
from utils.schema import FailureMask, LatencySummary, MaskAvailability, MetricsReport, WriteLatencySummary

logger = logging.getLogger(__name__)


def sample_failure_mask(network, fraction, seed):
    """
    Draw the devices that fail in one availability evaluation

    Every device but the cloud may fail, gateways included. Exactly
    floor(fraction * candidates) devices are drawn without replacement.

    Args:
        network (FogNetwork): the healthy network
        fraction (float): share of the fog devices to fail, in [0, 1)
        seed (int): seed of the draw

    Returns:
        FailureMask: the sampled mask
    """
    if not 0 <= fraction < 1:
        raise ParameterError(f"failure fraction must be in [0, 1), got {fraction}")
    candidates = sorted(network.storage_devices)
    count = fraction_count(fraction, len(candidates))
    rng = np.random.default_rng(seed)
    down = rng.choice(candidates, size=count, replace=False) if count else []
    return FailureMask(down_devices=frozenset(int(dev) for dev in down), fraction=fraction, seed=seed)


def inject_failures(network, fraction, seed):
    """Copy of the network with a seeded random share of its fog devices down"""
    mask = sample_failure_mask(network, fraction, seed)
    return network.with_down(mask.down_devices)


def apply_mask(network, mask):
    return network.with_down(mask.down_devices)


def _reachable(network, device):
    if not network.is_up(device):
        return {}
    return hop_distances(network, device)


def availability_read(scenario, placement, network=None):
    """Share of files whose cloud reaches at least one replica"""
    network = scenario.network if network is None else network
    if not scenario.files:
        return 1.0
    from_cloud = _reachable(network, network.require_cloud())
    readable = sum(
        1 for spec in scenario.files
        if any(dev in from_cloud for dev in placement.devices_for(spec.file_id))
    )
    return readable / len(scenario.files)


def availability_write(scenario, placement, network=None, require_all_sensors=True):
    """
    Share of files every sensor of which reaches at least one replica

    Args:
        scenario (Scenario): files and their sensors
        placement (PlacementMatrix): replica devices
        network (FogNetwork, optional): up-set to evaluate, the scenario's by default
        require_all_sensors (bool): False counts a file writable when any sensor
            reaches a replica

    Returns:
        float: ratio in [0, 1]
    """
    network = scenario.network if network is None else network
    if not scenario.files:
        return 1.0
    reach = {}
    writable = 0
    for spec in scenario.files:
        replicas = placement.devices_for(spec.file_id)
        verdicts = []
        for gateway in spec.distinct_gateways:
            if gateway not in reach:
                reach[gateway] = _reachable(network, gateway)
            verdicts.append(any(dev in reach[gateway] for dev in replicas))
        if all(verdicts) if require_all_sensors else any(verdicts):
            writable += 1
    return writable / len(scenario.files)


def latency_read(scenario, placement, network=None):
    """
    Latency of reading each file from its closest replica

    Files with no replica reachable from the cloud are left out and counted
    in excluded.

    Args:
        scenario (Scenario): files
        placement (PlacementMatrix): replica devices
        network (FogNetwork, optional): up-set to evaluate, the scenario's by default

    Returns:
        LatencySummary: mean and total over the included files
    """
    network = scenario.network if network is None else network
    cloud = network.require_cloud()
    values = []
    for spec in scenario.files:
        distances = latency_distances(network, cloud, spec.read_packet_bytes)
        reachable = [distances[dev] for dev in placement.devices_for(spec.file_id) if dev in distances]
        if reachable:
            values.append(min(reachable))
    excluded = len(scenario.files) - len(values)
    if excluded:
        logger.info("read latency leaves out %d unreachable file(s)", excluded)
    total = math.fsum(values)
    mean = total / len(values) if values else math.nan
    return LatencySummary(mean_ms=mean, total_ms=total, included=len(values), excluded=excluded)


def latency_write_extrema(scenario, placement, network=None):
    """
    Closest and furthest replica latency of every (file, sensor) pair

    Both variants are averaged over the sensor entries of all files, each
    sensor counted once even when several share a gateway. Pairs whose
    gateway is down or reaches no replica are left out; a pair that reaches
    only some replicas uses those.

    Returns:
        WriteLatencySummary: min/max means and totals
    """
    network = scenario.network if network is None else network
    lows, highs = [], []
    excluded = 0
    cache = {}
    for spec in scenario.files:
        replicas = placement.devices_for(spec.file_id)
        for gateway in spec.sensor_gateways:
            if not network.is_up(gateway):
                excluded += 1
                continue
            key = (gateway, spec.write_packet_bytes)
            if key not in cache:
                cache[key] = latency_distances(network, gateway, spec.write_packet_bytes)
            reachable = [cache[key][dev] for dev in replicas if dev in cache[key]]
            if not reachable:
                excluded += 1
                continue
            lows.append(min(reachable))
            highs.append(max(reachable))
    total_min, total_max = math.fsum(lows), math.fsum(highs)
    count = len(lows)
    return WriteLatencySummary(
        min_ms=total_min / count if count else math.nan,
        max_ms=total_max / count if count else math.nan,
        total_min_ms=total_min,
        total_max_ms=total_max,
        included=count,
        excluded=excluded,
    )


def _hops_or_raise(distances, source, device):
    if device not in distances:
        raise ConnectivityError(f"device {device} is unreachable from device {source}")
    return distances[device]


def _write_hops(network, spec, replicas, cache):
    hops = 0
    for gateway in spec.sensor_gateways:
        if gateway not in cache:
            cache[gateway] = hop_distances(network, gateway)
        hops += sum(_hops_or_raise(cache[gateway], gateway, dev) for dev in replicas)
    return hops


def _read_hops(cloud_distances, cloud, replicas):
    return min(_hops_or_raise(cloud_distances, cloud, dev) for dev in replicas)


def messages_write(scenario, placement, network=None):
    """Links crossed when every sensor writes to every replica of its file"""
    network = scenario.network if network is None else network
    cache = {}
    return sum(_write_hops(network, spec, placement.devices_for(spec.file_id), cache)
               for spec in scenario.files)


def messages_read(scenario, placement, network=None):
    """Links crossed when the cloud reads each file from its closest replica"""
    network = scenario.network if network is None else network
    cloud = network.require_cloud()
    from_cloud = hop_distances(network, cloud)
    return sum(_read_hops(from_cloud, cloud, placement.devices_for(spec.file_id))
               for spec in scenario.files)


def messages_rate_weighted(scenario, placement, network=None):
    """
    Message counts weighted by each file's operation rates

    Returns:
        tuple: (sum of write_rate * write hops, sum of read_rate * read hops)
    """
    network = scenario.network if network is None else network
    cloud = network.require_cloud()
    from_cloud = hop_distances(network, cloud)
    cache = {}
    write_rate = read_rate = 0.0
    for spec in scenario.files:
        replicas = placement.devices_for(spec.file_id)
        write_rate += spec.write_rate_per_ms * _write_hops(network, spec, replicas, cache)
        read_rate += spec.read_rate_per_ms * _read_hops(from_cloud, cloud, replicas)
    return write_rate, read_rate


def evaluate_all(scenario, placement, healthy_network=None, failure_masks=()):
    """
    Every objective of one placement

    Latencies and messages are measured on the healthy network; availability
    is averaged over the failure masks (measured on the healthy network when
    there are none).

    Args:
        scenario (Scenario): files and network
        placement (PlacementMatrix): the placement to evaluate
        healthy_network (FogNetwork, optional): defaults to the scenario's network
        failure_masks (list[FailureMask]): masks for the availability study

    Returns:
        tuple: (MetricsReport, list of MaskAvailability)
    """
    network = scenario.network if healthy_network is None else healthy_network

    per_mask = []
    for index, mask in enumerate(failure_masks):
        failed = apply_mask(network, mask)
        per_mask.append(MaskAvailability(
            mask_index=index,
            seed=mask.seed,
            down_count=len(mask.down_devices),
            avail_read=availability_read(scenario, placement, failed),
            avail_write=availability_write(scenario, placement, failed),
        ))
    if per_mask:
        avail_read = float(np.mean([row.avail_read for row in per_mask]))
        avail_write = float(np.mean([row.avail_write for row in per_mask]))
    else:
        avail_read = availability_read(scenario, placement, network)
        avail_write = availability_write(scenario, placement, network)

    read = latency_read(scenario, placement, network)
    write = latency_write_extrema(scenario, placement, network)
    msgs_write = messages_write(scenario, placement, network)
    write_rate, read_rate = messages_rate_weighted(scenario, placement, network)

    report = MetricsReport(
        avail_read=avail_read,
        avail_write=avail_write,
        lat_read_ms=read.mean_ms,
        lat_write_max_ms=write.max_ms,
        lat_write_min_ms=write.min_ms,
        msgs_write=msgs_write,
        msgs_read=messages_read(scenario, placement, network),
        lat_read_total_ms=read.total_ms,
        lat_write_min_total_ms=write.total_min_ms,
        lat_write_max_total_ms=write.total_max_ms,
        msgs_write_per_replica=msgs_write / placement.replicas_per_file,
        msgs_write_rate=write_rate,
        msgs_read_rate=read_rate,
        lat_read_excluded=read.excluded,
        lat_write_excluded=write.excluded,
    )
    return report, per_mask
