import numpy as np

from pamlab.grid_spectral import BoxSpec, GridField


def smooth_field(box: BoxSpec, seed: int, modes: int = 6) -> GridField:
    """Random smooth field from a handful of low native modes."""
    rng = np.random.default_rng(seed)
    x = box.coords + box.L / 2
    vals = np.zeros((box.N, box.N))
    for _ in range(modes):
        k1, k2 = rng.integers(0, 6, 2)
        a = rng.normal()
        if box.boundary == "neumann":
            vals += a * np.outer(np.cos(np.pi * k1 * x / box.L), np.cos(np.pi * k2 * x / box.L))
        else:
            vals += a * np.outer(np.sin(np.pi * (k1 + 1) * x / box.L), np.sin(np.pi * (k2 + 1) * x / box.L))
    return GridField(box, vals)
