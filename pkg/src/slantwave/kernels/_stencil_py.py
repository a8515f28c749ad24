"""NumPy reference implementation of the leapfrog stencil update.

The compiled extension (`_stencil.pyx`) implements the same update with the
same operation ordering, so both backends produce bit-identical fields.  Edge
planes of the output array are never written; callers keep them at zero.
"""

import numpy as np


def step_interior_2d(up, uc, un, coef):
    c = uc[1:-1, 1:-1]
    lap = uc[:-2, 1:-1] + uc[2:, 1:-1] + uc[1:-1, :-2] + uc[1:-1, 2:] - 4.0 * c
    un[1:-1, 1:-1] = (2.0 * c - up[1:-1, 1:-1]) + coef * lap


def step_interior_2d_eta(up, uc, un, inv_eta, coef):
    c = uc[1:-1, 1:-1]
    lap = uc[:-2, 1:-1] + uc[2:, 1:-1] + uc[1:-1, :-2] + uc[1:-1, 2:] - 4.0 * c
    un[1:-1, 1:-1] = (2.0 * c - up[1:-1, 1:-1]) + (coef * lap) * inv_eta[1:-1, 1:-1]


def step_interior_3d(up, uc, un, coef):
    c = uc[1:-1, 1:-1, 1:-1]
    lap = (
        uc[:-2, 1:-1, 1:-1]
        + uc[2:, 1:-1, 1:-1]
        + uc[1:-1, :-2, 1:-1]
        + uc[1:-1, 2:, 1:-1]
        + uc[1:-1, 1:-1, :-2]
        + uc[1:-1, 1:-1, 2:]
        - 6.0 * c
    )
    un[1:-1, 1:-1, 1:-1] = (2.0 * c - up[1:-1, 1:-1, 1:-1]) + coef * lap


def step_interior_3d_eta(up, uc, un, inv_eta, coef):
    c = uc[1:-1, 1:-1, 1:-1]
    lap = (
        uc[:-2, 1:-1, 1:-1]
        + uc[2:, 1:-1, 1:-1]
        + uc[1:-1, :-2, 1:-1]
        + uc[1:-1, 2:, 1:-1]
        + uc[1:-1, 1:-1, :-2]
        + uc[1:-1, 1:-1, 2:]
        - 6.0 * c
    )
    un[1:-1, 1:-1, 1:-1] = (2.0 * c - up[1:-1, 1:-1, 1:-1]) + (coef * lap) * inv_eta[
        1:-1, 1:-1, 1:-1
    ]


__all__ = [
    "step_interior_2d",
    "step_interior_2d_eta",
    "step_interior_3d",
    "step_interior_3d_eta",
]
