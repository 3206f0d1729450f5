import json
import logging
import math

from utils.errors import CapacityError, ConfigError
from utils.schema import ConstraintReport, ConstraintViolation, PlacementMatrix, TraceStep

logger = logging.getLogger(__name__)

_CAPACITY_EPS = 1e-9


def order_by_write_rate(files):
    """Files with the highest data generation rate first (ties by file id)"""
    return sorted(files, key=lambda spec: (-spec.write_rate_per_ms, spec.file_id))


class CapacityLedger:
    def __init__(self, network):
        """
        Free storage of every device during one placement run

        Args:
            network (FogNetwork): capacities are read once; the cloud is unbounded
        """
        self.cloud = network.cloud
        self._free = {dev: attrs.storage_capacity - attrs.storage_used
                      for dev, attrs in network.devices.items()}

    def free(self, device):
        return self._free[device]

    def fits(self, device, storage_req):
        return self._free[device] + _CAPACITY_EPS >= storage_req

    def allocate(self, device, storage_req):
        if not self.fits(device, storage_req):
            raise CapacityError(
                f"device {device} has {self._free[device]:g} free, {storage_req:g} requested"
            )
        if not math.isinf(self._free[device]):
            self._free[device] -= storage_req


def check_constraints(placement, scenario):
    """
    Check the replica count of every file and the capacity of every device

    Replicas must sit on distinct devices, except that a file listed in
    overflow_files may hold several of its replicas on the cloud.

    Args:
        placement (PlacementMatrix): the matrix to check
        scenario (Scenario): files and network it was computed for

    Returns:
        ConstraintReport: one violation per broken constraint, empty iff feasible
    """
    network = scenario.network
    violations = []
    used = {}
    overflowed = set(placement.overflow_files)

    for spec in scenario.files:
        devices = placement.assignments.get(spec.file_id)
        if devices is None:
            violations.append(ConstraintViolation(
                kind="missing_file", file_id=spec.file_id, detail="file has no placement"))
            continue
        if len(devices) != placement.replicas_per_file:
            violations.append(ConstraintViolation(
                kind="replication", file_id=spec.file_id,
                detail=f"{len(devices)} replica(s) placed, {placement.replicas_per_file} required"))
        must_differ = [dev for dev in devices if dev != network.cloud or spec.file_id not in overflowed]
        if len(set(must_differ)) != len(must_differ):
            violations.append(ConstraintViolation(
                kind="duplicate", file_id=spec.file_id,
                detail=f"replica devices {list(devices)} are not distinct"))
        for dev in set(devices):
            if dev not in network.devices:
                violations.append(ConstraintViolation(
                    kind="unknown_device", file_id=spec.file_id, device_id=dev,
                    detail="device is not part of the network"))
                continue
            used[dev] = used.get(dev, 0.0) + spec.storage_req

    for dev, amount in sorted(used.items()):
        capacity = network.capacity(dev)
        if amount > capacity + _CAPACITY_EPS:
            violations.append(ConstraintViolation(
                kind="capacity", device_id=dev, excess=amount - capacity,
                detail=f"{amount:g} stored, capacity {capacity:g}"))

    known = {spec.file_id for spec in scenario.files}
    for file_id in sorted(set(placement.assignments) - known):
        violations.append(ConstraintViolation(
            kind="missing_file", file_id=file_id, detail="placement refers to an unknown file"))
    return ConstraintReport(violations=violations)


def format_placement(placement):
    lines = [f"policy {placement.policy}", f"replicas {placement.replicas_per_file}"]
    for file_id, devices in sorted(placement.assignments.items()):
        lines.append(f"place {file_id} " + " ".join(str(dev) for dev in devices))
    for file_id in placement.overflow_files:
        lines.append(f"overflow {file_id}")
    return "\n".join(lines) + "\n"


def parse_placement(text):
    policy = "unknown"
    replicas = None
    assignments = {}
    overflow = []
    for raw in text.splitlines():
        fields = raw.split()
        if not fields or fields[0].startswith("#"):
            continue
        try:
            if fields[0] == "policy":
                policy = fields[1]
            elif fields[0] == "replicas":
                replicas = int(fields[1])
            elif fields[0] == "place":
                assignments[int(fields[1])] = tuple(int(dev) for dev in fields[2:])
            elif fields[0] == "overflow":
                overflow.append(int(fields[1]))
            else:
                raise ValueError(f"unknown record {fields[0]!r}")
        except (IndexError, ValueError) as e:
            raise ConfigError(f"cannot parse placement line {raw.strip()!r}: {e}") from e
    if replicas is None:
        replicas = max((len(devices) for devices in assignments.values()), default=1)
    return PlacementMatrix(policy=policy, replicas_per_file=replicas,
                           assignments=assignments, overflow_files=tuple(sorted(overflow)))


def write_placement(placement, path):
    with open(path, "w") as f:
        f.write(format_placement(placement))
    return path


def read_placement(path):
    with open(path, "r") as f:
        return parse_placement(f.read())


def write_trace(trace, path):
    """One JSON object per file, in placement order"""
    with open(path, "w") as f:
        header = {"policy": trace.policy, "replicas_per_file": trace.replicas_per_file}
        f.write(json.dumps(header) + "\n")
        for record in trace.files:
            f.write(record.model_dump_json() + "\n")
    return path


def complete_with_cloud(devices, spec, cloud, record, replicas):
    """
    Give a file's missing replicas to the cloud

    The cloud has unbounded storage, so it takes every replica the fog layer
    could not host, once per missing replica.

    Args:
        devices (tuple): replica devices found on the fog layer
        spec (FileSpec): the file
        cloud (int): cloud device id
        record (FileTrace): trace of the file, receives one overflow step per missing replica
        replicas (int): replicas the file needs

    Returns:
        tuple: devices, completed with the cloud up to the required replica count
    """
    missing = replicas - len(devices)
    if missing <= 0:
        return devices
    logger.warning("file %d overflows %d replica(s) to the cloud", spec.file_id, missing)
    for _ in range(missing):
        record.steps.append(TraceStep(stage="overflow", device=cloud, outcome="overflow"))
    return tuple(devices) + (cloud,) * missing
