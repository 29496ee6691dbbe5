"""Observation masks for directed graphs without self-dyads.

Three designs are provided:

* random dyad: each off-diagonal entry observed independently with
  probability rho (the only design the estimation theory targets);
* random node: a node set is drawn independently with probability rho
  and the corresponding rows and columns are observed;
* double standard: binary graphs only, an entry is observed with
  probability rho1 when the edge is present and rho0 when absent.

Graphs are directed (ordered pairs, i != j) and masks are not
symmetrized unless the design's ``symmetric`` flag is set, in which
case the lower triangle mirrors the upper one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DesignError

__all__ = ["MaskDesign", "Mask", "sample_mask", "rho_hat", "check_no_isolated_node"]


@dataclass(frozen=True)
class MaskDesign:
    """Observation design; build with the class methods."""

    kind: str  # "dyad" | "node" | "double"
    rho: float | None = None
    rho0: float | None = None
    rho1: float | None = None
    symmetric: bool = False

    def __post_init__(self):
        if self.kind in ("dyad", "node"):
            if self.rho is None or not 0.0 < self.rho <= 1.0:
                raise ValueError(f"{self.kind} design needs rho in (0, 1]")
        elif self.kind == "double":
            for name, p in (("rho0", self.rho0), ("rho1", self.rho1)):
                if p is None or not 0.0 <= p <= 1.0:
                    raise ValueError(f"double standard design needs {name} in [0, 1]")
        else:
            raise ValueError(f"unknown design kind {self.kind!r}")

    @classmethod
    def random_dyad(cls, rho: float, symmetric: bool = False) -> "MaskDesign":
        return cls("dyad", rho=rho, symmetric=symmetric)

    @classmethod
    def random_node(cls, rho: float, symmetric: bool = False) -> "MaskDesign":
        return cls("node", rho=rho, symmetric=symmetric)

    @classmethod
    def double_standard(
        cls, rho0: float, rho1: float, symmetric: bool = False
    ) -> "MaskDesign":
        return cls("double", rho0=rho0, rho1=rho1, symmetric=symmetric)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "symmetric": self.symmetric}
        for k in ("rho", "rho0", "rho1"):
            v = getattr(self, k)
            if v is not None:
                d[k] = v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MaskDesign":
        return cls(
            d["kind"],
            rho=d.get("rho"),
            rho0=d.get("rho0"),
            rho1=d.get("rho1"),
            symmetric=d.get("symmetric", False),
        )


@dataclass(frozen=True)
class Mask:
    """n x n boolean observation matrix; the diagonal is always False."""

    observed: np.ndarray
    node_selection: np.ndarray | None = None  # set for random node sampling

    def __post_init__(self):
        obs = np.array(self.observed, dtype=bool)
        if obs.ndim != 2 or obs.shape[0] != obs.shape[1]:
            raise ValueError("mask must be square")
        np.fill_diagonal(obs, False)
        obs.setflags(write=False)
        object.__setattr__(self, "observed", obs)

    @property
    def n(self) -> int:
        return self.observed.shape[0]

    def n_observed(self) -> int:
        return int(self.observed.sum())


def _symmetrize(draw: np.ndarray) -> np.ndarray:
    upper = np.triu(draw, 1)
    return upper | upper.T


def sample_mask(design: MaskDesign, n: int, rng, y: np.ndarray | None = None) -> Mask:
    """Draw an observation mask; deterministic under a fixed generator state.

    ``y`` is required (and must be binary off the diagonal) for the
    double standard design only; the two random designs never read it.
    """
    if design.kind == "dyad":
        draw = rng.random((n, n)) < design.rho
        if design.symmetric:
            draw = _symmetrize(draw)
        return Mask(draw)
    if design.kind == "node":
        selected = rng.random(n) < design.rho
        draw = selected[:, None] | selected[None, :]
        return Mask(draw, node_selection=selected)
    # double standard
    if y is None:
        raise DesignError("double standard sampling requires the value matrix")
    y = np.asarray(y, dtype=float)
    off = ~np.eye(n, dtype=bool)
    vals = y[off]
    if not np.all((vals == 0.0) | (vals == 1.0)):
        raise DesignError("double standard sampling requires binary values")
    p = np.where(y == 1.0, design.rho1, design.rho0)
    draw = rng.random((n, n)) < p
    if design.symmetric:
        draw = _symmetrize(draw)
    return Mask(draw)


def rho_hat(mask: Mask) -> float:
    """Fraction of observed entries among the n(n-1) off-diagonal positions.

    Under random dyad sampling this estimates the design parameter; for
    other designs it is only the effective dyad rate.
    """
    n = mask.n
    if n < 2:
        raise ValueError("need at least two nodes")
    return mask.n_observed() / (n * (n - 1))


def check_no_isolated_node(mask: Mask) -> bool:
    """True iff every node has at least one observed incident dyad."""
    obs = mask.observed
    incident = obs.any(axis=1) | obs.any(axis=0)
    return bool(incident.all())
