import logging

from utils.fog_network import weight_by_hop_count
from utils.graph_analysis import eigenvector_centrality, rank_by_centrality
from utils.placement import CapacityLedger, complete_with_cloud, order_by_write_rate
from utils.schema import FileTrace, PlacementMatrix, PlacementTrace, TraceStep

logger = logging.getLogger(__name__)


class SingleFilePolicy:
    name = "single-file"
    replicas_per_file = 1

    def place(self, scenario):
        """
        Place one copy of every file on the most central device with room

        Centrality is the eigenvector centrality of the network weighted by
        hop count to the file's sensors.

        Args:
            scenario (Scenario): network and files

        Returns:
            tuple: (PlacementMatrix, PlacementTrace)
        """
        network = scenario.network
        cloud = network.require_cloud()
        ledger = CapacityLedger(network)
        trace = PlacementTrace(policy=self.name, replicas_per_file=self.replicas_per_file)
        assignments = {}
        overflow = []

        for order, spec in enumerate(order_by_write_rate(scenario.files)):
            record = FileTrace(file_id=spec.file_id, order=order)
            weights = weight_by_hop_count(network, spec.sensor_gateways)
            centrality = eigenvector_centrality(network, weights)
            record.centrality = centrality

            for dev in rank_by_centrality(centrality, network.storage_devices):
                if ledger.fits(dev, spec.storage_req):
                    record.steps.append(TraceStep(stage="single", device=dev, outcome="chosen",
                                                  centrality=centrality.get(dev)))
                    break
                record.steps.append(TraceStep(stage="single", device=dev, outcome="no_capacity",
                                              centrality=centrality.get(dev)))

            devices = complete_with_cloud(record.chosen(), spec, cloud, record, self.replicas_per_file)
            if cloud in devices:
                overflow.append(spec.file_id)
            for dev in devices:
                ledger.allocate(dev, spec.storage_req)
            assignments[spec.file_id] = devices
            trace.files.append(record)
            logger.debug("file %d -> %s", spec.file_id, devices)

        placement = PlacementMatrix(
            policy=self.name,
            replicas_per_file=self.replicas_per_file,
            assignments=dict(sorted(assignments.items())),
            overflow_files=tuple(sorted(overflow)),
        )
        return placement, trace


def place_single_file(scenario):
    return SingleFilePolicy().place(scenario)
