# filtering/variants.py
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .matrix_kit import InverseStrategy, MoorePenrose


class FilterKind(str, enum.Enum):
    """The three ensemble Kalman-Bucy filters driven by one observation stream"""
    DETERMINISTIC_CORRELATED = 'deterministic_correlated'
    CLASSICAL = 'classical'
    TRANSPORT = 'transport'

    @property
    def requires_uncorrelated(self):
        # Classical and transport filters are only defined for C~ = 0
        return self is not FilterKind.DETERMINISTIC_CORRELATED


@dataclass(frozen=True)
class FilterVariant:
    tag: FilterKind = FilterKind.DETERMINISTIC_CORRELATED
    inverse: Optional[InverseStrategy] = None

    def inverse_for(self, d_x):
        """Configured inverse, or the Moore-Penrose cut-off d_x * 1e-14 when none is set"""
        if self.inverse is None:
            return MoorePenrose.for_dimension(d_x)
        return self.inverse
