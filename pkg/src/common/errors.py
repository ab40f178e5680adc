# Copyright (c) 2024-present, Monitored Fermions contributors
# All rights reserved.
#
# This source code is licensed under the license found in the
# LICENSE file in the root directory of this source tree.
#


class SimulationError(Exception):
    """Base class for every error raised by the simulator and its tools."""


class InvalidParameterError(SimulationError, ValueError):
    """A parameter violates the documented precondition of an operation."""


class DomainError(SimulationError, ValueError):
    """A closed-form expression was evaluated outside its domain."""


class DegenerateJumpError(SimulationError):
    """A jump with vanishing Born weight was selected.

    Attributes:
        site (int): lattice site of the jump
        kind (str): jump kind
        weight (float): Born weight of the selected outcome
        context (dict): trajectory information added by the ensemble runner
    """

    def __init__(self, message, site=None, kind=None, weight=None):
        super(DegenerateJumpError, self).__init__(message)
        self.message = message
        self.site = site
        self.kind = kind
        self.weight = weight
        self.context = {}

    def with_context(self, **context):
        """Attach trajectory information for replaying the failure."""
        self.context.update(context)
        details = ", ".join(f"{k}={v}" for k, v in self.context.items())
        self.args = (f"{self.message} [{details}]",)
        return self

    def __reduce__(self):
        # keeps the context when joblib ships the error out of a worker
        return (self.__class__,
                (self.message, self.site, self.kind, self.weight),
                {"context": self.context, "args": self.args})


class InternalInconsistencyError(SimulationError):
    """The sampler found no outcome with positive probability."""


class InvariantViolationError(SimulationError):
    """A state invariant (purity, hermiticity, particle bookkeeping) broke."""


class CapacityError(SimulationError):
    """The exact many-body oracle was asked for a lattice it cannot hold."""


class ModelMismatchError(SimulationError):
    """An estimator was applied to data from a model it does not describe."""


class NumericalError(SimulationError):
    """A quadrature or fit did not converge.

    Attributes:
        diagnostics (dict): solver output useful to reproduce the failure
    """

    def __init__(self, message, diagnostics=None):
        super(NumericalError, self).__init__(message)
        self.diagnostics = diagnostics or {}
