class FogPlacementError(Exception):
    """Base class for every error raised by the placement library"""


class NetworkValidationError(FogPlacementError, ValueError):
    """Malformed physical layer: self-loop, duplicate edge, dangling or non-dense id"""


class ParameterError(FogPlacementError, ValueError):
    """An argument outside its documented range"""


class TopologyError(FogPlacementError):
    """The network lacks a structural element an operation needs (e.g. the cloud)"""


class ConnectivityError(FogPlacementError):
    """A device that must be reachable is not"""


class DeviceLookupError(FogPlacementError, KeyError):
    """Unknown device id, or a device that is currently down"""

    def __str__(self):
        # KeyError quotes its argument; keep the plain message
        return str(self.args[0]) if self.args else ""


class ConvergenceError(FogPlacementError, ArithmeticError):
    """Power iteration did not converge"""

    def __init__(self, message, iterations):
        super().__init__(message)
        self.iterations = iterations


class CapacityError(FogPlacementError, ArithmeticError):
    """Storage capacity cannot satisfy a request (or there is none at all)"""


class ConfigError(FogPlacementError, ValueError):
    """Malformed configuration, network, scenario or placement file"""


class ConstraintViolationError(FogPlacementError):
    """A placement broke the replication or the capacity constraint"""

    def __init__(self, report):
        super().__init__(f"placement violates {len(report.violations)} constraint(s): "
                         + "; ".join(v.describe() for v in report.violations[:5]))
        self.report = report
