"""Graph simulation with retained ground truth.

The network is drawn first (labels, then all dyad values) and the
observation mask acts on it afterwards; the two random designs never
read the values.  Diagonals are NaN in memory ("NA" on disk): there are
no self-dyads, and a value may only be read where the mask is True.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Assignment, SbmParams
from .sampling import Mask, MaskDesign, sample_mask

__all__ = ["ObservedGraph", "GroundTruth", "sample_assignment", "sample_graph", "simulate_observed"]


@dataclass(frozen=True)
class ObservedGraph:
    """Dyad values with an observation mask; unobserved entries are NaN."""

    values: np.ndarray
    mask: Mask
    family_id: str | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.mask.observed.shape:
            raise ValueError("values and mask shapes differ")
        values[~self.mask.observed] = np.nan
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.mask.n

    def filled_values(self, fill: float = 0.0) -> np.ndarray:
        """Values with unobserved entries replaced, safe to sum against the mask."""
        return np.where(self.mask.observed, self.values, fill)


@dataclass(frozen=True)
class GroundTruth:
    params_star: SbmParams
    z_star: Assignment
    full_values: np.ndarray
    design: MaskDesign
    seed: object

    def __post_init__(self):
        if self.z_star.n_blocks != self.params_star.n_blocks:
            raise ValueError("assignment and parameters disagree on the block count")


def sample_assignment(props, n: int, rng) -> Assignment:
    """Draw n labels i.i.d. from the given block proportions."""
    props = np.asarray(props, dtype=float)
    labels = rng.choice(props.shape[0], size=n, p=props)
    return Assignment(labels, props.shape[0])


def sample_graph(
    params: SbmParams, z: Assignment, rng, symmetric: bool = False
) -> np.ndarray:
    """Draw all dyad values given labels; the diagonal is left as NaN.

    With ``symmetric=True`` the lower triangle mirrors the upper one
    (undirected studies); by default every ordered pair is independent.
    """
    labels = z.labels
    a = params.conn[labels[:, None], labels[None, :]]
    values = params.family.sample(a, rng, size=a.shape)
    if symmetric:
        iu = np.triu_indices(z.n, 1)
        values[(iu[1], iu[0])] = values[iu]
    np.fill_diagonal(values, np.nan)
    return values


def simulate_observed(
    params: SbmParams, design: MaskDesign, n: int, seed
) -> tuple[ObservedGraph, GroundTruth]:
    """Draw a full graph, then a mask on top of it.

    ``seed`` may be an int or a sequence of ints (replicate streams are
    derived by appending indices to a master seed); identical seeds give
    bit-identical output.
    """
    rng = np.random.default_rng(seed)
    z = sample_assignment(params.props, n, rng)
    full = sample_graph(params, z, rng, symmetric=design.symmetric)
    y_for_mask = full if design.kind == "double" else None
    mask = sample_mask(design, n, rng, y=y_for_mask)
    graph = ObservedGraph(full, mask, family_id=params.family.name)
    truth = GroundTruth(params, z, full, design, seed)
    return graph, truth
