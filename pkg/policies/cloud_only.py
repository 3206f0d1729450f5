from utils.placement import order_by_write_rate
from utils.schema import FileTrace, PlacementMatrix, PlacementTrace, TraceStep


class CloudOnlyPolicy:
    """Control case: every file stored once, in the cloud provider"""
    name = "cloud"
    replicas_per_file = 1

    def place(self, scenario):
        cloud = scenario.network.require_cloud()
        trace = PlacementTrace(policy=self.name, replicas_per_file=self.replicas_per_file)
        assignments = {}
        for order, spec in enumerate(order_by_write_rate(scenario.files)):
            record = FileTrace(file_id=spec.file_id, order=order)
            record.steps.append(TraceStep(stage="cloud", device=cloud, outcome="chosen"))
            trace.files.append(record)
            assignments[spec.file_id] = (cloud,)
        placement = PlacementMatrix(
            policy=self.name,
            replicas_per_file=self.replicas_per_file,
            assignments=dict(sorted(assignments.items())),
        )
        return placement, trace
