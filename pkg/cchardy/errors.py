class CCHardyError(Exception):
    pass


class HoermanderFailure(CCHardyError):
    def __init__(self, sample, rank: int, max_step: int):
        self.sample = sample
        self.rank = rank
        self.max_step = max_step
        super().__init__(
            f"bracket-generating condition fails at {list(sample)}: "
            f"rank {rank} after brackets of degree <= {max_step}"
        )


class Singularity(CCHardyError):
    pass


class DegenerateBasis(CCHardyError):
    pass


class InconclusiveVolume(CCHardyError):
    pass


class ComparabilityViolation(CCHardyError):
    pass


class NoPathFound(CCHardyError):
    pass


class NonConvergence(CCHardyError):
    pass


class ExponentViolation(CCHardyError):
    pass


class GridError(CCHardyError, ValueError):
    pass


class DisconnectedDomain(GridError):
    pass


class EmptyDomain(GridError):
    pass


class NonFiniteWeight(CCHardyError):
    pass


class PropertyViolation(CCHardyError):
    def __init__(self, clause: str, detail: str = ""):
        self.clause = clause
        super().__init__(f"Whitney property ({clause}) violated: {detail}")


class ZeroGradient(CCHardyError):
    pass


class AnomalousExcess(CCHardyError):
    def __init__(self, best: float, bound: float, tolerance: float):
        self.best = best
        self.bound = bound
        self.tolerance = tolerance
        super().__init__(
            f"ratio {best:.6g} exceeds bound {bound:.6g} by more than {tolerance:.0%}"
        )
