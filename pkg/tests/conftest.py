"""Shared builders for random chart backgrounds."""

import numpy as np

from gencourant import tensors as tn
from gencourant.expr import chart
from gencourant.streff import Background
from gencourant.tensors import DOWN


def bumpy_metric(c, scale=0.2, salt=1):
    gen = c.rng(salt)
    n = c.dim
    pert = [[tn.ex.random_polynomial(c, gen, 2, scale) for _ in range(n)] for _ in range(n)]
    return tn.from_function(
        c, (DOWN, DOWN),
        lambda i, j: (tn.ex.ONE if i == j else tn.ex.ZERO) + pert[min(i, j)][max(i, j)],
    )


def bumpy_b(c, salt=2, scale=0.2, offset=0.0):
    """Random polynomial 2-form; offset adds a constant top block so the
    form is invertible on even charts."""
    gen = c.rng(salt)
    coeffs = {}
    for i in range(c.dim):
        for j in range(i + 1, c.dim):
            e = tn.ex.random_polynomial(c, gen, 2, scale)
            if offset and j == i + 1 and i % 2 == 0:
                e = e + offset
            coeffs[(i, j)] = e
    return tn.form_from_wedge_coeffs(c, 2, coeffs)


def random_background(n, salt, with_b=True, with_h=True, invertible_b=False, seed=500):
    names = "x y z w"[: 2 * n - 1]
    c = chart(names, seed=seed + salt, num_points=12)
    gen = c.rng(salt + 17)
    g = bumpy_metric(c, salt=salt)
    B = (
        bumpy_b(c, salt=salt + 1, offset=1.0 if invertible_b else 0.0)
        if with_b
        else tn.zeros(c, (DOWN, DOWN))
    )
    phi = tn.ex.random_polynomial(c, gen, 2, 0.3)
    if with_h:
        H = tn.exterior_derivative(bumpy_b(c, salt=salt + 2))
    else:
        H = tn.zeros(c, (DOWN,) * 3)
    return Background(c, g, B, phi, H)
