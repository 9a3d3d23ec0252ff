class InfeasibleError(RuntimeError):
    """No certificate exists for the requested data (or the search bracket collapsed)."""


class SimulationDiverged(RuntimeError):
    """State became non-finite during integration; .index is the first bad grid index."""

    def __init__(self, index: int, message: str | None = None):
        super().__init__(message or f"non-finite state at grid index {index}")
        self.index = index
