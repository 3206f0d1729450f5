import math
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from utils.fog_network import build_network
from utils.schema import DataConsumer, DeviceAttrs, DeviceRole, ExperimentConfig, FileSpec, LinkAttrs, ValueRange
from utils.workload import Scenario


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the full-scale statistical tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-scale statistical test, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


UNIT_LINK = LinkAttrs(propagation_ms=1.0, bandwidth_bytes_per_ms=1.0)


def make_network(edges, roles=None, capacity=100.0, link=UNIT_LINK):
    """
    Network from (u, v) pairs or (u, v, LinkAttrs) triples

    roles maps device id -> DeviceRole (fog by default); the cloud always
    gets infinite capacity, capacity may be a number or a dict per device.
    """
    roles = roles or {}
    ids = {dev for edge in edges for dev in edge[:2]} | set(roles)
    devices = {}
    for dev in sorted(ids):
        role = roles.get(dev, DeviceRole.FOG)
        if role == DeviceRole.CLOUD:
            cap = math.inf
        else:
            cap = capacity.get(dev, 100.0) if isinstance(capacity, dict) else capacity
        devices[dev] = DeviceAttrs(role=role, storage_capacity=cap)
    triples = [edge if len(edge) == 3 else (edge[0], edge[1], link) for edge in edges]
    return build_network(triples, devices)


def make_file(file_id, gateways, storage_req=1.0, write_rate=0.001, read_rate=0.001,
              write_bytes=1000.0, read_bytes=1000.0):
    return FileSpec(
        file_id=file_id,
        storage_req=storage_req,
        write_rate_per_ms=write_rate,
        write_packet_bytes=write_bytes,
        read_rate_per_ms=read_rate,
        read_packet_bytes=read_bytes,
        sensor_gateways=tuple(gateways),
    )


def make_scenario(network, files, seed=0):
    return Scenario(network=network, files=tuple(files),
                    consumer=DataConsumer(consumer_device=network.cloud), rng_seed=seed)


# Ten devices, gateways 4 and 9, cloud 1. Devices 3 and 5 each sit on one
# of the two shortest 4-9 paths; device 2 is the only bridge to the cloud.
WORKED_EXAMPLE_EDGES = [
    (4, 0), (4, 6), (4, 7), (0, 6), (6, 7), (0, 7),
    (3, 4), (9, 8), (9, 2), (8, 2), (5, 9), (5, 8),
    (1, 2), (3, 9), (4, 5), (2, 3),
]


@pytest.fixture
def worked_example():
    roles = {4: DeviceRole.GATEWAY, 9: DeviceRole.GATEWAY, 1: DeviceRole.CLOUD}
    return make_network(WORKED_EXAMPLE_EDGES, roles)


@pytest.fixture
def worked_scenario(worked_example):
    return make_scenario(worked_example, [make_file(0, (4, 9))])


@pytest.fixture
def star():
    """Center 0, leaves 1..4, leaves 1 and 2 are gateways, cloud 5 hangs off the center"""
    roles = {1: DeviceRole.GATEWAY, 2: DeviceRole.GATEWAY, 5: DeviceRole.CLOUD}
    return make_network([(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)], roles)


@pytest.fixture
def path_network():
    """gateway 0 - 1 - 2 - 3 - 4 - cloud 5"""
    roles = {0: DeviceRole.GATEWAY, 5: DeviceRole.CLOUD}
    return make_network([(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)], roles)


@pytest.fixture
def small_config():
    return ExperimentConfig(n_devices=30, n_files=8, repeats=2,
                            device_capacity=ValueRange(min=10, max=25))


@pytest.fixture
def tmp_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path
