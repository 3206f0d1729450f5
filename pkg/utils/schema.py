import math
from enum import Enum
from typing import Dict, FrozenSet, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Every file is stored exactly this many times
REPLICATION_FACTOR = 3
CLOUD_CAPACITY = math.inf


class DeviceRole(str, Enum):
    """Role of a device in the physical layer"""
    FOG = "fog"
    GATEWAY = "gateway"
    CLOUD = "cloud"


class DeviceAttrs(BaseModel):
    """Pydantic model for the attributes of one device"""
    model_config = ConfigDict(frozen=True)

    role: DeviceRole = DeviceRole.FOG
    storage_capacity: float = Field(ge=0)
    storage_used: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _usage_within_capacity(self):
        if self.storage_used > self.storage_capacity:
            raise ValueError(
                f"storage_used {self.storage_used} exceeds capacity {self.storage_capacity}"
            )
        return self


class LinkAttrs(BaseModel):
    """Pydantic model for the attributes of one network link"""
    model_config = ConfigDict(frozen=True)

    propagation_ms: float = Field(gt=0)
    bandwidth_bytes_per_ms: float = Field(gt=0)

    def latency_ms(self, packet_bytes):
        """Store-and-forward latency of one packet over this link"""
        return self.propagation_ms + packet_bytes / self.bandwidth_bytes_per_ms


class FileSpec(BaseModel):
    """Pydantic model for one file of the logical layer

    sensor_gateways holds one entry per sensor: the gateway the sensor is
    attached to. The consumer side is always the cloud provider.
    """
    model_config = ConfigDict(frozen=True)

    file_id: int = Field(ge=0)
    storage_req: float = Field(gt=0)
    write_rate_per_ms: float = Field(ge=0)
    write_packet_bytes: float = Field(gt=0)
    read_rate_per_ms: float = Field(ge=0)
    read_packet_bytes: float = Field(gt=0)
    sensor_gateways: Tuple[int, ...] = Field(min_length=1)
    replication_factor: Literal[3] = REPLICATION_FACTOR

    @property
    def distinct_gateways(self):
        return tuple(sorted(set(self.sensor_gateways)))


class DataConsumer(BaseModel):
    """The reader of every file: the cloud provider"""
    model_config = ConfigDict(frozen=True)

    consumer_device: int = Field(ge=0)


class ValueRange(BaseModel):
    """Inclusive [min, max] range a parameter is drawn from"""
    model_config = ConfigDict(frozen=True)

    min: float
    max: float

    @model_validator(mode="after")
    def _ordered(self):
        if self.min > self.max:
            raise ValueError(f"range minimum {self.min} is greater than maximum {self.max}")
        return self


class ExperimentConfig(BaseModel):
    """Pydantic model for the characterization of an experiment

    Defaults are the standard experiment parameters.
    """
    model_config = ConfigDict(frozen=True)

    n_devices: int = Field(default=200, ge=2)
    n_files: int = Field(default=100, ge=1)
    propagation_ms: ValueRange = ValueRange(min=1, max=5)
    bandwidth_bytes_per_ms: ValueRange = ValueRange(min=50000, max=75000)
    device_capacity: ValueRange = ValueRange(min=10, max=25)
    file_storage: ValueRange = ValueRange(min=1, max=6)
    read_packet_bytes: ValueRange = ValueRange(min=1500000, max=4500000)
    write_packet_bytes: ValueRange = ValueRange(min=1500000, max=4500000)
    write_rate_per_ms: ValueRange = ValueRange(min=1 / 1000, max=1 / 200)
    read_rate_per_ms: ValueRange = ValueRange(min=1 / 6000, max=1 / 1200)
    gateway_fraction: float = Field(default=0.10, gt=0, lt=1)
    sensor_popularity_max: float = Field(default=0.15, gt=0, le=1)
    popularity_mode: Literal["cap", "fixed"] = "cap"
    replication_factor: Literal[3] = REPLICATION_FACTOR
    ba_attachment: int = Field(default=2, ge=1)
    cloud_uplinks: int = Field(default=3, ge=1)
    repeats: int = Field(default=10, ge=1)
    rng_seed: int = 0

    @model_validator(mode="after")
    def _positive_ranges(self):
        for name in ("propagation_ms", "bandwidth_bytes_per_ms", "file_storage",
                     "read_packet_bytes", "write_packet_bytes"):
            if getattr(self, name).min <= 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("device_capacity", "write_rate_per_ms", "read_rate_per_ms"):
            if getattr(self, name).min < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.n_devices <= self.ba_attachment:
            raise ValueError(
                f"n_devices ({self.n_devices}) must exceed the attachment parameter ({self.ba_attachment})"
            )
        return self


class Bipartition(BaseModel):
    """Two balanced halves of the up devices"""
    model_config = ConfigDict(frozen=True)

    part_a: FrozenSet[int]
    part_b: FrozenSet[int]

    @model_validator(mode="after")
    def _balanced_and_disjoint(self):
        if self.part_a & self.part_b:
            raise ValueError("bipartition parts overlap")
        if abs(len(self.part_a) - len(self.part_b)) > 1:
            raise ValueError("bipartition parts differ in size by more than one")
        return self

    def side_of(self, device):
        return 0 if device in self.part_a else 1


class PlacementMatrix(BaseModel):
    """Pydantic model for the placement matrix: the devices holding each file's replicas

    Replica order is kept (first, second, third choice). Validation of the
    replication and capacity constraints lives in check_constraints so that
    invalid matrices can still be represented and reported.
    """
    model_config = ConfigDict(frozen=True)

    policy: str
    replicas_per_file: int = Field(ge=1)
    assignments: Dict[int, Tuple[int, ...]]
    overflow_files: Tuple[int, ...] = ()

    def devices_for(self, file_id):
        return self.assignments[file_id]

    @property
    def overflow_count(self):
        return len(self.overflow_files)


class TraceStep(BaseModel):
    """One candidate examined while placing a replica"""
    model_config = ConfigDict(frozen=True)

    stage: str
    device: int
    outcome: Literal["chosen", "no_capacity", "duplicate", "same_partition", "overflow"]
    centrality: Optional[float] = None


class FileTrace(BaseModel):
    """Decision record for one file"""
    file_id: int
    order: int
    steps: List[TraceStep] = []
    partition: Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]] = None
    centrality: Dict[int, float] = {}
    centrality_with_cloud: Dict[int, float] = {}
    source_gateway: Optional[int] = None

    def chosen(self):
        return tuple(step.device for step in self.steps if step.outcome in ("chosen", "overflow"))


class PlacementTrace(BaseModel):
    """Auditable record of a placement run, replayable into its matrix"""
    policy: str
    replicas_per_file: int
    files: List[FileTrace] = []

    def replay(self):
        assignments = {}
        overflow = []
        for record in self.files:
            assignments[record.file_id] = record.chosen()
            if any(step.outcome == "overflow" for step in record.steps):
                overflow.append(record.file_id)
        return PlacementMatrix(
            policy=self.policy,
            replicas_per_file=self.replicas_per_file,
            assignments=dict(sorted(assignments.items())),
            overflow_files=tuple(sorted(overflow)),
        )


class ConstraintViolation(BaseModel):
    """One broken constraint of a placement"""
    model_config = ConfigDict(frozen=True)

    kind: Literal["replication", "capacity", "duplicate", "unknown_device", "missing_file"]
    file_id: Optional[int] = None
    device_id: Optional[int] = None
    excess: Optional[float] = None
    detail: str = ""

    def describe(self):
        where = []
        if self.file_id is not None:
            where.append(f"file {self.file_id}")
        if self.device_id is not None:
            where.append(f"device {self.device_id}")
        text = f"{self.kind} ({', '.join(where)})"
        if self.excess is not None:
            text += f" excess {self.excess:g}"
        return f"{text}: {self.detail}" if self.detail else text


class ConstraintReport(BaseModel):
    """Every violated constraint; empty iff the placement is feasible"""
    violations: List[ConstraintViolation] = []

    @property
    def feasible(self):
        return not self.violations


class FailureMask(BaseModel):
    """The set of devices marked down for one availability evaluation"""
    model_config = ConfigDict(frozen=True)

    down_devices: FrozenSet[int]
    fraction: float = Field(ge=0, lt=1)
    seed: int


class LatencySummary(BaseModel):
    """Mean and total of a latency metric over the files it could be computed for"""
    model_config = ConfigDict(frozen=True)

    mean_ms: float
    total_ms: float
    included: int
    excluded: int


class WriteLatencySummary(BaseModel):
    """Closest/furthest replica writing latencies averaged over (file, sensor) pairs"""
    model_config = ConfigDict(frozen=True)

    min_ms: float
    max_ms: float
    total_min_ms: float
    total_max_ms: float
    included: int
    excluded: int


class MetricsReport(BaseModel):
    """Pydantic model for the seven objectives of one placement, plus reporting variants"""
    model_config = ConfigDict(frozen=True)

    avail_read: float = Field(ge=0, le=1)
    avail_write: float = Field(ge=0, le=1)
    lat_read_ms: float
    lat_write_max_ms: float
    lat_write_min_ms: float
    msgs_write: int = Field(ge=0)
    msgs_read: int = Field(ge=0)
    lat_read_total_ms: float = 0.0
    lat_write_min_total_ms: float = 0.0
    lat_write_max_total_ms: float = 0.0
    msgs_write_per_replica: float = 0.0
    msgs_write_rate: float = 0.0
    msgs_read_rate: float = 0.0
    lat_read_excluded: int = 0
    lat_write_excluded: int = 0

    @field_validator("lat_write_max_ms")
    @classmethod
    def _not_negative(cls, value):
        if value < 0:
            raise ValueError("latency cannot be negative")
        return value


class MaskAvailability(BaseModel):
    """Availability pair measured under one failure mask"""
    model_config = ConfigDict(frozen=True)

    mask_index: int
    seed: int
    down_count: int
    avail_read: float
    avail_write: float
