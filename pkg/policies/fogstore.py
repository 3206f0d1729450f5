import logging

import numpy as np

from utils.graph_analysis import hop_distances, kernighan_lin_bipartition, shortest_hop_path
from utils.placement import CapacityLedger, complete_with_cloud, order_by_write_rate
from utils.schema import REPLICATION_FACTOR, FileTrace, PlacementMatrix, PlacementTrace, TraceStep

logger = logging.getLogger(__name__)


class FogStorePolicy:
    name = "fogstore"

    def __init__(self, seed=0, partition_seed=0):
        """
        Greedy shortest-path placement with one failure-group rule

        A single data source is picked per file and replicas are laid along
        the shortest path from it toward the cloud. Regions come from one
        unweighted Kernighan-Lin bisection shared by every file, and the
        three replicas of a file may not all sit in the same region.

        Args:
            seed (int): seed of the source-gateway draws
            partition_seed (int): seed of the region bisection
        """
        self.seed = seed
        self.partition_seed = partition_seed

    def place(self, scenario):
        network = scenario.network
        cloud = network.require_cloud()
        ledger = CapacityLedger(network)
        rng = np.random.default_rng(self.seed)
        regions = kernighan_lin_bipartition(network, None, self.partition_seed)
        partition = (tuple(sorted(regions.part_a)), tuple(sorted(regions.part_b)))

        trace = PlacementTrace(policy=self.name, replicas_per_file=REPLICATION_FACTOR)
        assignments = {}
        overflow = []

        for order, spec in enumerate(order_by_write_rate(scenario.files)):
            gateways = spec.distinct_gateways
            source = gateways[int(rng.integers(len(gateways)))]
            record = FileTrace(file_id=spec.file_id, order=order, partition=partition, source_gateway=source)

            self._walk(network, ledger, spec, regions, source, record)
            devices = complete_with_cloud(record.chosen(), spec, cloud, record, REPLICATION_FACTOR)
            if cloud in devices:
                overflow.append(spec.file_id)
            for dev in devices:
                ledger.allocate(dev, spec.storage_req)
            assignments[spec.file_id] = devices
            trace.files.append(record)
            logger.debug("file %d (source %d) -> %s", spec.file_id, source, devices)

        placement = PlacementMatrix(
            policy=self.name,
            replicas_per_file=REPLICATION_FACTOR,
            assignments=dict(sorted(assignments.items())),
            overflow_files=tuple(sorted(overflow)),
        )
        return placement, trace

    @staticmethod
    def candidates(network, source):
        """
        Visit order of the greedy walk

        Args:
            network (FogNetwork): the network
            source (int): the file's chosen sensor gateway

        Returns:
            list: the shortest path from source to the cloud (cloud left out),
            then every other reachable device by hop count, lowest id first
        """
        cloud = network.cloud
        path = shortest_hop_path(network, source, cloud) or [source]
        order = [dev for dev in path if dev != cloud]
        seen = set(order)
        distances = hop_distances(network, source)
        nearest = sorted((dist, dev) for dev, dist in distances.items() if dev != cloud and dev not in seen)
        return order + [dev for _, dev in nearest]

    def _walk(self, network, ledger, spec, regions, source, record):
        chosen = []
        for dev in self.candidates(network, source):
            if len(chosen) == REPLICATION_FACTOR:
                break
            label = f"replica{len(chosen) + 1}"
            if not ledger.fits(dev, spec.storage_req):
                record.steps.append(TraceStep(stage=label, device=dev, outcome="no_capacity"))
                continue
            if len(chosen) == REPLICATION_FACTOR - 1:
                sides = {regions.side_of(other) for other in chosen}
                # the last replica must leave the region the others share
                if len(sides) == 1 and regions.side_of(dev) in sides:
                    record.steps.append(TraceStep(stage=label, device=dev, outcome="same_partition"))
                    continue
            record.steps.append(TraceStep(stage=label, device=dev, outcome="chosen"))
            chosen.append(dev)
        return chosen


def place_fogstore(scenario, seed=0):
    return FogStorePolicy(seed=seed).place(scenario)
