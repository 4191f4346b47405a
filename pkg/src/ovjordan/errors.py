"""Exception types raised by the exact engine."""


class OvJordanError(Exception):
    """Base class for every error raised by the package."""


class IdenticallyZeroOnCell(OvJordanError):
    def __init__(self, cell: int):
        super().__init__(f"function vanishes identically on cell {cell}")
        self.cell = cell


class DimensionMismatch(OvJordanError):
    pass


class PartitionMismatch(OvJordanError):
    pass


class NotIdempotent(OvJordanError):
    pass


class UnboundedInput(OvJordanError):
    pass


class PivotTooSmall(OvJordanError):
    pass


class NotCommuting(OvJordanError):
    def __init__(self, index: int, cell: int | None = None):
        super().__init__(f"candidate {index} does not commute with the operator"
                         + ("" if cell is None else f" on cell {cell}"))
        self.index = index
        self.cell = cell


class NotAnnihilating(OvJordanError):
    def __init__(self, i: int, j: int, cell: int | None = None):
        super().__init__(f"candidates {i} and {j} do not annihilate each other"
                         + ("" if cell is None else f" on cell {cell}"))
        self.pair = (i, j)
        self.cell = cell


class SumNotIdentity(OvJordanError):
    def __init__(self, cell: int | None = None):
        super().__init__("candidates do not sum to the identity"
                         + ("" if cell is None else f" on cell {cell}"))
        self.cell = cell


class NotMinimal(OvJordanError):
    def __init__(self, index: int, witness, cell: int | None = None):
        super().__init__(f"candidate {index} is not minimal"
                         + ("" if cell is None else f" on cell {cell}"))
        self.index = index
        self.witness = witness
        self.cell = cell


class SpectrumNotSplit(OvJordanError):
    def __init__(self, factor, cell: int):
        super().__init__(f"characteristic polynomial does not split on cell {cell}; "
                         f"non-split factor of degree {len(factor) - 1}")
        self.factor = factor
        self.cell = cell


class DiagonalCollision(OvJordanError):
    pass


class UnboundedShear(OvJordanError):
    def __init__(self, quotient, point):
        super().__init__(f"shear quotient has a pole at {point}")
        self.quotient = quotient
        self.point = point


class NotInCommutant(OvJordanError):
    pass


class NotMaximal(OvJordanError):
    def __init__(self, witness, cell: int | None = None):
        super().__init__("idempotent set is not maximal abelian"
                         + ("" if cell is None else f" on cell {cell}"))
        self.witness = witness
        self.cell = cell


class NoCanonicalForm(OvJordanError):
    def __init__(self, obstruction=None):
        super().__init__("operator admits no canonical form")
        self.obstruction = obstruction


class Undecided(OvJordanError):
    pass


class ClusterAmbiguous(OvJordanError):
    pass


class SchemaError(OvJordanError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
