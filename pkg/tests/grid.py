"""Shared plant grids and cached oracle searches."""
import functools

from marginlab.oracle import best_margin_search
from marginlab.plant import SecondOrderZero

REAL_GRID = (0.6, 1, 1.5, 3, 4, 5, 7, 8)
COMPLEX_GRID = (0.5, 2, 4.1, 6, 9)


def plant_for(kind, z):
    return SecondOrderZero.real(z, 2, 6) if kind == "real" else SecondOrderZero.complex(z, 4, 1)


GRID = [("real", z) for z in REAL_GRID] + [("complex", z) for z in COMPLEX_GRID]


@functools.lru_cache(maxsize=None)
def search(kind, z, controller, objective):
    return best_margin_search(plant_for(kind, z), controller, objective)
