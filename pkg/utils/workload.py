import logging
import os
from fractions import Fraction
from typing import Tuple

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator

from utils.errors import CapacityError, ConfigError
from utils.fog_network import (
    FogNetwork,
    assign_gateways,
    attach_cloud,
    format_network,
    generate_barabasi_albert,
    parse_network_lines,
)
from utils.schema import DataConsumer, DeviceRole, ExperimentConfig, FileSpec, LinkAttrs, ValueRange

logger = logging.getLogger(__name__)

# Config file keys (parameter symbols) -> ExperimentConfig fields
RANGE_KEYS = {
    "netPrp": "propagation_ms",
    "netBdw": "bandwidth_bytes_per_ms",
    "datCap": "device_capacity",
    "datReq": "file_storage",
    "readPacketSize": "read_packet_bytes",
    "writePacketSize": "write_packet_bytes",
    "writeRate": "write_rate_per_ms",
    "readRate": "read_rate_per_ms",
}
SCALAR_KEYS = {
    "DEV": "n_devices",
    "FILE": "n_files",
    "gtwPercentage": "gateway_fraction",
    "snsPopularity": "sensor_popularity_max",
    "snsPopularity.mode": "popularity_mode",
    "replicationFactor": "replication_factor",
    "baAttachment": "ba_attachment",
    "cloudUplinks": "cloud_uplinks",
    "repeats": "repeats",
    "seed": "rng_seed",
}
_INT_FIELDS = {"n_devices", "n_files", "replication_factor", "ba_attachment",
               "cloud_uplinks", "repeats", "rng_seed"}


class Scenario(BaseModel):
    """A network, its files and the static sensor/consumer mapping"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    network: FogNetwork
    files: Tuple[FileSpec, ...]
    consumer: DataConsumer
    rng_seed: int = 0
    warnings: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def _static_mapping(self):
        if self.network.cloud != self.consumer.consumer_device:
            raise ValueError(f"consumer device {self.consumer.consumer_device} is not the cloud")
        seen = set()
        for spec in self.files:
            if spec.file_id in seen:
                raise ValueError(f"duplicate file id {spec.file_id}")
            seen.add(spec.file_id)
            for gateway in spec.sensor_gateways:
                if gateway not in self.network.devices or self.network.role(gateway) != DeviceRole.GATEWAY:
                    raise ValueError(f"file {spec.file_id}: sensor gateway {gateway} is not a gateway")
        return self

    @property
    def cloud(self):
        return self.consumer.consumer_device

    def file(self, file_id):
        return next(spec for spec in self.files if spec.file_id == file_id)

    def with_network(self, network):
        """Same files on a different up-set of the same network"""
        return self.model_copy(update={"network": network})


def _parse_number(key, value, integer):
    try:
        number = Fraction(value.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"{key}: {value!r} is not a number") from e
    if integer:
        if number.denominator != 1:
            raise ConfigError(f"{key}: {value!r} must be an integer")
        return int(number)
    return float(number)


def config_from_mapping(values):
    """
    Build an ExperimentConfig from parameter-symbol keys

    Args:
        values (dict): key -> string value, e.g. {"netPrp.min": "1"}

    Returns:
        ExperimentConfig: unset keys keep their defaults
    """
    fields = {}
    ranges = {}
    for key, value in values.items():
        if value is None:
            raise ConfigError(f"{key}: missing value")
        if key in SCALAR_KEYS:
            name = SCALAR_KEYS[key]
            if name == "popularity_mode":
                fields[name] = value.strip()
            else:
                fields[name] = _parse_number(key, value, name in _INT_FIELDS)
            continue
        symbol, _, bound = key.rpartition(".")
        if symbol in RANGE_KEYS and bound in ("min", "max"):
            ranges.setdefault(RANGE_KEYS[symbol], {})[bound] = _parse_number(key, value, False)
            continue
        raise ConfigError(f"unknown configuration key {key!r}")

    defaults = ExperimentConfig()
    for name, bounds in ranges.items():
        current = getattr(defaults, name)
        bounds.setdefault("min", current.min)
        bounds.setdefault("max", current.max)
        try:
            fields[name] = ValueRange(**bounds)
        except ValidationError as e:
            raise ConfigError(f"{name}: {e.errors()[0]['msg']}") from e
    try:
        return ExperimentConfig(**fields)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment configuration: {e}") from e


def load_experiment_config(path):
    """Read a key=value experiment configuration file"""
    if not os.path.isfile(path):
        raise ConfigError(f"configuration file {path} not found")
    return config_from_mapping(dict(dotenv_values(path)))


def format_experiment_config(config):
    """key=value text that load_experiment_config reads back to the same config"""
    lines = []
    for key, name in SCALAR_KEYS.items():
        lines.append(f"{key}={getattr(config, name)}")
    for symbol, name in RANGE_KEYS.items():
        bounds = getattr(config, name)
        lines.append(f"{symbol}.min={bounds.min!r}")
        lines.append(f"{symbol}.max={bounds.max!r}")
    return "\n".join(lines) + "\n"


def _uniform(rng, bounds):
    return float(rng.uniform(bounds.min, bounds.max)) if bounds.min < bounds.max else float(bounds.min)


def _uniform_int(rng, bounds):
    low, high = int(np.ceil(bounds.min)), int(np.floor(bounds.max))
    return int(rng.integers(low, high + 1))


def _draw_link(rng, config):
    return LinkAttrs(
        propagation_ms=_uniform(rng, config.propagation_ms),
        bandwidth_bytes_per_ms=_uniform(rng, config.bandwidth_bytes_per_ms),
    )


def _draw_sensors(rng, config, gateways):
    if config.popularity_mode == "fixed":
        popularity = config.sensor_popularity_max
    else:
        # 1 - U[0, 1) lies in (0, 1], so the parameter is never zero
        popularity = config.sensor_popularity_max * (1.0 - rng.random())
    draws = rng.random(len(gateways))
    chosen = [gw for gw, draw in zip(gateways, draws) if draw < popularity]
    if not chosen:
        chosen = [gateways[int(rng.integers(len(gateways)))]]
    return tuple(chosen)


def generate_scenario(config, seed=None):
    """
    Random scenario following the experiment characterization

    Builds a Barabasi-Albert network, selects the gateways and the cloud
    uplinks by betweenness, draws every attribute uniformly within the
    configured ranges and attaches each file's sensors to the gateways.

    Args:
        config (ExperimentConfig): parameter ranges
        seed (int, optional): overrides config.rng_seed

    Returns:
        Scenario: pure function of (config, seed)
    """
    seed = config.rng_seed if seed is None else seed
    rng = np.random.default_rng(seed)

    network = generate_barabasi_albert(config.n_devices, config.ba_attachment, int(rng.integers(2**31)))
    network = network.with_links({key: _draw_link(rng, config) for key in network.links})
    network = network.with_devices({
        dev: attrs.model_copy(update={"storage_capacity": float(_uniform_int(rng, config.device_capacity))})
        for dev, attrs in network.devices.items()
    })
    network = assign_gateways(network, config.gateway_fraction)
    uplinks = [_draw_link(rng, config) for _ in range(config.cloud_uplinks)]
    network = attach_cloud(network, config.cloud_uplinks, uplinks)

    gateways = network.gateways
    if not gateways:
        raise ConfigError(
            f"gateway fraction {config.gateway_fraction} selects no gateway among {config.n_devices} devices"
        )
    files = []
    for file_id in range(config.n_files):
        files.append(FileSpec(
            file_id=file_id,
            storage_req=float(_uniform_int(rng, config.file_storage)),
            write_rate_per_ms=_uniform(rng, config.write_rate_per_ms),
            write_packet_bytes=float(_uniform_int(rng, config.write_packet_bytes)),
            read_rate_per_ms=_uniform(rng, config.read_rate_per_ms),
            read_packet_bytes=float(_uniform_int(rng, config.read_packet_bytes)),
            sensor_gateways=_draw_sensors(rng, config, gateways),
        ))

    warnings = []
    demand = sum(spec.replication_factor * spec.storage_req for spec in files)
    capacity = sum(network.capacity(dev) for dev in network.storage_devices)
    if demand > capacity:
        message = (f"storage demand {demand:g} exceeds fog capacity {capacity:g}; "
                   "the cloud absorbs the overflow")
        logger.warning(message)
        warnings.append(message)

    scenario = Scenario(
        network=network,
        files=tuple(files),
        consumer=DataConsumer(consumer_device=network.cloud),
        rng_seed=seed,
        warnings=tuple(warnings),
    )
    logger.info("scenario seed=%d: %d devices (%d gateways), %d files, storage usage %.3f",
                seed, network.n_devices, len(gateways), len(files),
                demand / capacity if capacity else float("nan"))
    return scenario


def storage_usage_ratio(scenario):
    """Replicated storage demand over the capacity of the fog devices (cloud excluded)"""
    network = scenario.network
    capacity = sum(network.capacity(dev) for dev in network.storage_devices)
    if capacity <= 0:
        raise CapacityError("fog devices offer no storage capacity")
    demand = sum(spec.replication_factor * spec.storage_req for spec in scenario.files)
    return demand / capacity


def _format_value(value):
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def format_scenario(scenario):
    """Scenario text: header, network section, file lines, warnings"""
    lines = [f"scenario seed={scenario.rng_seed}", format_network(scenario.network).rstrip("\n")]
    for spec in scenario.files:
        gateways = ",".join(str(gw) for gw in spec.sensor_gateways)
        lines.append(
            f"file {spec.file_id} {_format_value(spec.storage_req)} {_format_value(spec.write_rate_per_ms)} "
            f"{_format_value(spec.write_packet_bytes)} {_format_value(spec.read_rate_per_ms)} "
            f"{_format_value(spec.read_packet_bytes)} gateways={gateways}"
        )
    for warning in scenario.warnings:
        lines.append(f"warning {warning}")
    return "\n".join(lines) + "\n"


def parse_scenario(text):
    lines = text.splitlines()
    seed = 0
    if lines and lines[0].startswith("scenario"):
        header = dict(field.split("=", 1) for field in lines[0].split()[1:] if "=" in field)
        seed = int(header.get("seed", 0))
        lines = lines[1:]

    network, rest = parse_network_lines(lines)
    files = []
    warnings = []
    for raw in rest:
        fields = raw.split()
        try:
            if fields[0] == "file":
                gateways = fields[7].split("=", 1)
                if gateways[0] != "gateways":
                    raise ValueError("expected gateways=<id,...>")
                files.append(FileSpec(
                    file_id=int(fields[1]),
                    storage_req=float(fields[2]),
                    write_rate_per_ms=float(fields[3]),
                    write_packet_bytes=float(fields[4]),
                    read_rate_per_ms=float(fields[5]),
                    read_packet_bytes=float(fields[6]),
                    sensor_gateways=tuple(int(gw) for gw in gateways[1].split(",") if gw),
                ))
            elif fields[0] == "warning":
                warnings.append(raw.strip()[len("warning "):])
            else:
                raise ValueError(f"unknown record {fields[0]!r}")
        except (IndexError, ValueError) as e:
            raise ConfigError(f"cannot parse scenario line {raw.strip()!r}: {e}") from e

    try:
        return Scenario(
            network=network,
            files=tuple(files),
            consumer=DataConsumer(consumer_device=network.require_cloud()),
            rng_seed=seed,
            warnings=tuple(warnings),
        )
    except ValidationError as e:
        raise ConfigError(f"invalid scenario: {e}") from e


def write_scenario(scenario, path):
    with open(path, "w") as f:
        f.write(format_scenario(scenario))
    return path


def read_scenario(path):
    with open(path, "r") as f:
        return parse_scenario(f.read())
