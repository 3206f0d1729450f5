import logging

from utils.fog_network import weight_by_hop_count
from utils.graph_analysis import (
    betweenness_subset,
    hops_to_sources,
    kernighan_lin_bipartition,
    rank_by_centrality,
)
from utils.placement import CapacityLedger, complete_with_cloud, order_by_write_rate
from utils.schema import REPLICATION_FACTOR, FileTrace, PlacementMatrix, PlacementTrace, TraceStep

logger = logging.getLogger(__name__)


class ReplicaAwarePolicy:
    name = "replica-aware"

    def __init__(self, kl_seed=0):
        """
        Community-aware and cloud provider-aware replica placement

        Args:
            kl_seed (int): seed of the initial split of every Kernighan-Lin run
        """
        self.kl_seed = kl_seed

    def place(self, scenario):
        """
        Place three replicas of every file

        Files are handled sequentially, highest write rate first. For each
        file the network is weighted by hop count to the file's sensors and
        split in two; the first two replicas go to the most central device
        with room in each half (betweenness among the sensor gateways), the
        third to the most central remaining device once the cloud joins the
        sources and targets. Equal centralities are ranked by total hop count
        to the file's sensors, then by device id.

        Args:
            scenario (Scenario): network and files

        Returns:
            tuple: (PlacementMatrix, PlacementTrace)
        """
        network = scenario.network
        cloud = network.require_cloud()
        ledger = CapacityLedger(network)
        trace = PlacementTrace(policy=self.name, replicas_per_file=REPLICATION_FACTOR)
        assignments = {}
        overflow = []

        for order, spec in enumerate(order_by_write_rate(scenario.files)):
            record = FileTrace(file_id=spec.file_id, order=order)
            devices = self._place_file(network, ledger, spec, record)
            devices = complete_with_cloud(devices, spec, cloud, record, REPLICATION_FACTOR)
            if cloud in devices:
                overflow.append(spec.file_id)
            for dev in devices:
                ledger.allocate(dev, spec.storage_req)
            assignments[spec.file_id] = devices
            trace.files.append(record)
            logger.debug("file %d -> %s", spec.file_id, devices)

        placement = PlacementMatrix(
            policy=self.name,
            replicas_per_file=REPLICATION_FACTOR,
            assignments=dict(sorted(assignments.items())),
            overflow_files=tuple(sorted(overflow)),
        )
        return placement, trace

    def _place_file(self, network, ledger, spec, record):
        cloud = network.cloud
        gateways = list(spec.distinct_gateways)

        # community-aware placement of the first two replicas
        centrality = betweenness_subset(network, gateways, gateways)
        weights = weight_by_hop_count(network, spec.sensor_gateways)
        halves = kernighan_lin_bipartition(network, weights, self.kl_seed)
        record.centrality = centrality
        record.partition = (tuple(sorted(halves.part_a)), tuple(sorted(halves.part_b)))
        # equal centralities (all zero for a single gateway) go to the device nearest the sensors
        proximity = hops_to_sources(network, spec.sensor_gateways)

        racks = [
            rank_by_centrality(centrality, [dev for dev in part if dev != cloud], proximity)
            for part in (halves.part_a, halves.part_b)
        ]
        first = self._first_fit(racks[0], ledger, spec, centrality, record, "first", set())
        second = self._first_fit(racks[1], ledger, spec, centrality, record, "second", set())
        # a half without room hands its replica to the other half's next candidates
        if first is None:
            first = self._first_fit(racks[1], ledger, spec, centrality, record, "first",
                                    {second}, skip_infeasible=True)
        if second is None:
            second = self._first_fit(racks[0], ledger, spec, centrality, record, "second",
                                     {first}, skip_infeasible=True)

        # cloud provider-aware placement of the third replica
        with_cloud = betweenness_subset(network, gateways + [cloud], gateways + [cloud])
        record.centrality_with_cloud = with_cloud
        ranked = rank_by_centrality(with_cloud, network.storage_devices, proximity)
        self._first_fit(ranked, ledger, spec, with_cloud, record, "third", {first, second})

        # selection order, so the trace replays to the same tuple
        return record.chosen()

    @staticmethod
    def _first_fit(candidates, ledger, spec, centrality, record, stage, taken, skip_infeasible=False):
        """First candidate with enough free storage that is not already taken"""
        for dev in candidates:
            if skip_infeasible and not ledger.fits(dev, spec.storage_req):
                continue
            score = centrality.get(dev)
            if dev in taken:
                record.steps.append(TraceStep(stage=stage, device=dev, outcome="duplicate", centrality=score))
                continue
            if not ledger.fits(dev, spec.storage_req):
                record.steps.append(TraceStep(stage=stage, device=dev, outcome="no_capacity", centrality=score))
                continue
            record.steps.append(TraceStep(stage=stage, device=dev, outcome="chosen", centrality=score))
            return dev
        return None


def place_replica_aware(scenario, kl_seed=0):
    return ReplicaAwarePolicy(kl_seed=kl_seed).place(scenario)
