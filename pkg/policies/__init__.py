from policies.cloud_only import CloudOnlyPolicy
from policies.fogstore import FogStorePolicy, place_fogstore
from policies.replica_aware import ReplicaAwarePolicy, place_replica_aware
from policies.single_file import SingleFilePolicy, place_single_file
from utils.errors import ParameterError

# Every registered policy name
POLICY_NAMES = ("replica-aware", "single-file", "fogstore", "cloud")


def get_policy(name, seed=0):
    """
    Build a placement policy by name

    Args:
        name (str): one of POLICY_NAMES
        seed (int): seeds the Kernighan-Lin split (replica-aware) or the
            source-gateway draws (fogstore); ignored by the others

    Returns:
        object: a policy exposing name and place(scenario)
    """
    if name == "replica-aware":
        return ReplicaAwarePolicy(kl_seed=seed)
    if name == "single-file":
        return SingleFilePolicy()
    if name == "fogstore":
        return FogStorePolicy(seed=seed)
    if name == "cloud":
        return CloudOnlyPolicy()
    raise ParameterError(f"unknown policy {name!r}, expected one of {', '.join(POLICY_NAMES)}")


__all__ = [
    "POLICY_NAMES",
    "CloudOnlyPolicy",
    "FogStorePolicy",
    "ReplicaAwarePolicy",
    "SingleFilePolicy",
    "get_policy",
    "place_fogstore",
    "place_replica_aware",
    "place_single_file",
]
