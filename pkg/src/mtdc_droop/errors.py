"""Exception hierarchy.

Validation problems (bad input, violated modelling assumptions) derive from
:class:`ValidationError`; failures of the numerics derive from
:class:`NumericalError`. The CLI maps the two families to exit codes 1 and 2.
"""


class ValidationError(ValueError):
    pass


class DisconnectedGridError(ValidationError):
    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        shown = ", ".join("{" + ", ".join(str(i + 1) for i in c) + "}" for c in self.components)
        super().__init__(f"DC grid is not connected; components (1-based): {shown}")


class AssumptionError(ValidationError):
    """An analysis was asked for outside the assumptions it is valid under."""


class ScenarioParseError(ValidationError):
    def __init__(self, message, line=None, col=None, path=None):
        self.line = line
        self.col = col
        self.path = path
        where = f"{path}:" if path else ""
        if line is not None:
            where += f"{line}:{col}: "
        elif where:
            where += " "
        super().__init__(where + message)


class NumericalError(ArithmeticError):
    pass


class SingularityError(NumericalError):
    """Nonlinear model evaluated at a non-positive DC voltage."""

    def __init__(self, node, voltage, time=None):
        self.node = node
        self.voltage = voltage
        self.time = time
        at = f" at t = {time:.6g} s" if time is not None else ""
        super().__init__(f"DC voltage at node {node + 1} is {voltage:.6g} <= 0{at}")


class StiffnessError(NumericalError):
    pass
