class GraphMovesError(Exception):
    pass


class IneligibleMove(GraphMovesError):
    def __init__(self, clause: str):
        super().__init__(clause)
        self.clause = clause


class IllegalAddition(GraphMovesError):
    def __init__(self, clause: str):
        super().__init__(clause)
        self.clause = clause


class PosetMismatch(GraphMovesError):
    pass


class HypothesisViolated(GraphMovesError):
    def __init__(self, clause: str):
        super().__init__(clause)
        self.clause = clause
