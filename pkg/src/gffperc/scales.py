"""Geometric scale ladder L_n = ell0^n * L0 shared by fields and bridges."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ScaleLadder:
    """Scales L_n = ell0^n * L0 with the separation/complexity parameters.

    kappa governs how far bridge boxes must stay from the connected sets,
    K caps the number of boxes per scale.  The asymptotic regime needs
    L0 >= 100, ell0 >= 1000, kappa >= 20, K >= 100 and ell0 >= 22*kappa;
    desk-scale ladders are allowed and `in_asymptotic_regime` records
    whether the regime holds.
    """

    L0: int
    ell0: int
    kappa: int = 2
    K: int = 100
    n_max: int = 8

    def __post_init__(self):
        if self.L0 < 2 or self.ell0 < 2 or self.kappa < 2 or self.K < 1:
            raise ValueError("need L0 >= 2, ell0 >= 2, kappa >= 2, K >= 1")

    def depth(self, n: int) -> int:
        """L_n, the field range at level n."""
        if n < 0:
            raise ValueError("negative level")
        return self.ell0 ** n * self.L0

    def spacing(self, n: int) -> int:
        """Anchor spacing 2*L_n + 1 of the level-n box lattice."""
        return 2 * self.depth(n) + 1

    def level_of_depth(self, L: int) -> int:
        """n with L_n == L (errors if L is not on the ladder)."""
        n = 0
        while self.depth(n) < L:
            n += 1
        if self.depth(n) != L:
            raise ValueError(f"{L} is not a ladder depth")
        return n

    @property
    def in_asymptotic_regime(self) -> bool:
        return (self.L0 >= 100 and self.ell0 >= max(1000, 22 * self.kappa)
                and self.kappa >= 20 and self.K >= 100)
