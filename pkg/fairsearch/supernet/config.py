from typing import List, Tuple

from pydantic import BaseModel, Field

from fairsearch.exceptions import ImageTooSmall
from fairsearch.space.operations import (
    PRIMITIVES,
    OperationKind,
    canonical_primitives,
)


class SupernetConfig(BaseModel):
    num_cells: int = Field(8, gt=0)
    init_channels: int = Field(8, ge=2)
    num_classes: int = Field(10, ge=2)
    image_size: int = Field(32, gt=0)
    in_channels: int = Field(3, gt=0)
    embedding_dim: int = Field(64, gt=0)
    use_batch_norm: bool = True
    bn_eps: float = Field(1e-5, gt=0)
    primitives: List[OperationKind] = Field(
        default_factory=lambda: list(PRIMITIVES)
    )

    def primitive_kinds(self) -> Tuple[OperationKind, ...]:
        return canonical_primitives([kind.value for kind in self.primitives])

    def reduction_positions(self) -> List[int]:
        """
        Cell indices of the reduction cells, at one and two thirds of
        the depth

        :return: List[int] - sorted, without duplicates
        """
        return sorted({self.num_cells // 3, (2 * self.num_cells) // 3})

    def min_image_size(self) -> int:
        return 2 ** len(self.reduction_positions())

    def check_image_size(self) -> None:
        minimum = self.min_image_size()
        if self.image_size < minimum or self.image_size % minimum:
            raise ImageTooSmall(
                f"image_size {self.image_size} does not fit "
                f"{len(self.reduction_positions())} reduction cells, use a "
                f"multiple of {minimum} (minimum size {minimum})"
            )
