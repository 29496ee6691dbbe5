"""Block-model parameters, assignments, and label-permutation machinery.

Conventions used throughout the package:

* ``props`` is the length-Q vector of block proportions and ``conn`` the
  Q x Q matrix of natural parameters of the dyad distribution; both sit
  in a :class:`SbmParams`.
* Labels are 0-based integers in ``{0, ..., Q-1}`` in memory (1-based on
  disk, see :mod:`sbmiss.graph_io`).
* A permutation ``s`` is a tuple with ``s[q]`` = source index placed at
  position ``q``: permuted proportions are ``props[s]``, permuted
  connectivity is ``conn[ix_(s, s)]``, and a relabeled assignment maps
  label ``l`` to ``s^{-1}(l)``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EstimationWarning, SizeError
from .families import Family, get_family

__all__ = [
    "SbmParams",
    "Assignment",
    "params_from_means",
    "s_star_matrix",
    "identity_perm",
    "inverse_perm",
    "compose_perms",
    "apply_permutation",
    "symmetry_group",
    "confusion_matrix",
    "hamming_distance_up_to_perm",
    "is_c_regular",
    "class_distinctness",
    "align",
    "param_distance",
    "assumption_report",
]

MAX_EXHAUSTIVE_Q = 8


@dataclass(frozen=True)
class SbmParams:
    """Block proportions plus natural-parameter connectivity.

    ``props`` must be a nonnegative probability vector (sum 1 within
    1e-12); every ``conn`` entry must lie in the family's clamp
    interval.  Zero proportions are allowed so exact closed-form
    estimates on degenerate samples remain representable; use
    :func:`assumption_report` to check the interior conditions the
    asymptotic theory assumes.
    """

    props: np.ndarray
    conn: np.ndarray
    family: Family

    def __post_init__(self):
        props = np.array(self.props, dtype=float)
        conn = np.array(self.conn, dtype=float)
        if props.ndim != 1:
            raise ValueError("props must be a vector")
        q = props.shape[0]
        if conn.shape != (q, q):
            raise ValueError(f"conn must be {q}x{q}, got {conn.shape}")
        if np.any(props < 0.0) or np.any(props > 1.0):
            raise ValueError("props entries must lie in [0, 1]")
        if abs(props.sum() - 1.0) > 1e-12:
            raise ValueError("props must sum to 1 within 1e-12")
        fam = get_family(self.family)
        lo, hi = fam.clamp_interval
        if np.any(conn < lo) or np.any(conn > hi):
            raise ValueError(
                f"conn entries must lie in the {fam.name} clamp interval [{lo}, {hi}]"
            )
        props.setflags(write=False)
        conn.setflags(write=False)
        object.__setattr__(self, "props", props)
        object.__setattr__(self, "conn", conn)
        object.__setattr__(self, "family", fam)

    @property
    def n_blocks(self) -> int:
        return self.props.shape[0]

    def mean_matrix(self) -> np.ndarray:
        """Q x Q matrix of cell means psi'(conn)."""
        return np.asarray(self.family.psi_prime(self.conn))

    def to_dict(self) -> dict:
        return {
            "props": self.props.tolist(),
            "conn": self.conn.tolist(),
            "family": self.family.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SbmParams":
        return cls(np.asarray(d["props"]), np.asarray(d["conn"]), d["family"])


def params_from_means(family, props, means) -> SbmParams:
    """Build parameters from a matrix of cell means.

    Means are pulled off the support boundary and the resulting natural
    parameters clipped into the clamp interval, so degenerate entries
    (e.g. a Bernoulli mean of exactly 0) stay representable.  Equal
    means always map to equal natural parameters, which preserves any
    symmetry of the mean matrix.
    """
    fam = get_family(family)
    means = fam.clamp_mean(np.asarray(means, dtype=float))
    conn = fam.clamp_natural(fam.natural_from_mean(means))
    return SbmParams(np.asarray(props, dtype=float), np.atleast_2d(conn), fam)


@dataclass(frozen=True)
class Assignment:
    """Length-n vector of 0-based block labels, with the block count Q."""

    labels: np.ndarray
    n_blocks: int

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValueError("labels must be a vector")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be >= 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_blocks):
            raise ValueError(f"labels must lie in [0, {self.n_blocks})")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def counts(self) -> np.ndarray:
        """Block sizes, including empty blocks."""
        return np.bincount(self.labels, minlength=self.n_blocks)

    def proportions(self) -> np.ndarray:
        return self.counts() / max(self.n, 1)

    def one_hot(self) -> np.ndarray:
        """n x Q indicator matrix with exactly one 1 per row."""
        z = np.zeros((self.n, self.n_blocks))
        z[np.arange(self.n), self.labels] = 1.0
        return z


def s_star_matrix(params: SbmParams) -> np.ndarray:
    """Matrix of true cell means psi'(conn), used by the limit formulas."""
    return params.mean_matrix()


# --------------------------------------------------------------------------
# permutations
# --------------------------------------------------------------------------


def identity_perm(q: int) -> tuple:
    return tuple(range(q))


def inverse_perm(s) -> tuple:
    inv = [0] * len(s)
    for pos, src in enumerate(s):
        inv[src] = pos
    return tuple(inv)


def compose_perms(s, t) -> tuple:
    """Composition so that applying ``s`` then ``t`` equals applying ``compose_perms(s, t)``."""
    return tuple(s[t[q]] for q in range(len(s)))


def apply_permutation(x, s):
    """Relabel blocks of a parameter set or an assignment.

    For parameters, position ``q`` of the result takes block ``s[q]`` of
    the input (rows and columns of ``conn`` move jointly).  For an
    assignment, label ``l`` becomes ``s^{-1}(l)``, so parameters and
    labels permuted with the same ``s`` stay consistent.  Applying ``s``
    then ``inverse_perm(s)`` is the identity.
    """
    s = tuple(int(v) for v in s)
    if sorted(s) != list(range(len(s))):
        raise ValueError(f"not a permutation: {s}")
    idx = np.asarray(s)
    if isinstance(x, SbmParams):
        if len(s) != x.n_blocks:
            raise ValueError("permutation size must match the block count")
        return SbmParams(x.props[idx], x.conn[np.ix_(idx, idx)], x.family)
    if isinstance(x, Assignment):
        if len(s) != x.n_blocks:
            raise ValueError("permutation size must match the block count")
        inv = np.asarray(inverse_perm(s))
        return Assignment(inv[x.labels], x.n_blocks)
    raise TypeError(f"cannot permute object of type {type(x).__name__}")


def param_distance(a: SbmParams, b: SbmParams) -> float:
    """Max-norm discrepancy between two parameter sets."""
    return max(
        float(np.max(np.abs(a.props - b.props))),
        float(np.max(np.abs(a.conn - b.conn))),
    )


def _check_q(q: int) -> None:
    if q > MAX_EXHAUSTIVE_Q:
        raise SizeError(
            f"exhaustive search over {q}! permutations refused (Q > {MAX_EXHAUSTIVE_Q})"
        )


def symmetry_group(params: SbmParams, tol: float = 1e-9) -> list[tuple]:
    """All block permutations that leave the parameters unchanged.

    Exhaustive over the Q! permutations (Q <= 8).  Always contains the
    identity; for generic parameters it contains nothing else.
    """
    q = params.n_blocks
    _check_q(q)
    group = []
    for s in itertools.permutations(range(q)):
        if param_distance(apply_permutation(params, s), params) <= tol:
            group.append(s)
    return group


def confusion_matrix(z: Assignment, z_star: Assignment) -> np.ndarray:
    """R[q, q'] = fraction of nodes with true block q assigned to block q'."""
    if z.n != z_star.n or z.n_blocks != z_star.n_blocks:
        raise ValueError("assignments must share n and the block count")
    q = z.n_blocks
    flat = z_star.labels * q + z.labels
    return np.bincount(flat, minlength=q * q).reshape(q, q) / z.n


def hamming_distance_up_to_perm(z: Assignment, z_star: Assignment):
    """Minimum relabeling disagreement count and an achieving permutation.

    Minimizes the number of positions where the relabeled ``z`` differs
    from ``z_star`` over all Q! block permutations; ties go to the
    lexicographically smallest permutation.
    """
    q = z.n_blocks
    _check_q(q)
    counts = confusion_matrix(z, z_star) * z.n  # counts[q_true, q_test]
    best_perm, best_matches = None, -1.0
    for s in itertools.permutations(range(q)):
        # relabeled z matches z_star at i iff z_i == s(z*_i)
        matches = sum(counts[t, s[t]] for t in range(q))
        if matches > best_matches:
            best_perm, best_matches = s, matches
    return int(round(z.n - best_matches)), best_perm


def is_c_regular(z: Assignment, c: float) -> bool:
    """True iff every block (including absent ones) holds at least c*n nodes."""
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    return bool(z.counts().min() >= c * z.n)


def class_distinctness(params: SbmParams) -> float:
    """Worst-case best-separating KL between two connectivity rows.

    min over ordered pairs q != q' of max over columns l of
    KL(conn[q, l], conn[q', l]).  Returns 0 (with a degeneracy warning)
    when two rows coincide.
    """
    fam = params.family
    conn = params.conn
    q = params.n_blocks
    if q == 1:
        return math.inf
    kl_all = np.asarray(fam.kl(conn[:, None, :], conn[None, :, :]))  # (q, q', l)
    best_sep = kl_all.max(axis=2)
    off = ~np.eye(q, dtype=bool)
    delta = float(best_sep[off].min())
    if delta == 0.0:
        warnings.warn(
            "two connectivity rows are identical: classes are not distinct",
            EstimationWarning,
            stacklevel=2,
        )
    return delta


def align(params_hat: SbmParams, params_star: SbmParams) -> tuple:
    """Permutation minimizing the max-norm discrepancy of the permuted estimate.

    Returns the lexicographically smallest minimizer of
    ``param_distance(apply_permutation(params_hat, s), params_star)``.
    Works purely on parameters, so it applies when true labels are
    unknown.
    """
    q = params_hat.n_blocks
    if q != params_star.n_blocks:
        raise ValueError("parameter sets must share the block count")
    _check_q(q)
    best_perm, best_d = None, np.inf
    for s in itertools.permutations(range(q)):
        d = param_distance(apply_permutation(params_hat, s), params_star)
        if d < best_d:
            best_perm, best_d = s, d
    return best_perm


def assumption_report(
    params: SbmParams, rho: float | None = None, n: int | None = None, c: float = 1e-4
) -> dict:
    """Runtime check of the regularity conditions the limit theory assumes.

    Reports whether proportions are inside [c, 1-c], how far connectivity
    entries sit from the clamp boundary, the identifiability margin (the
    smallest gap between coordinates of props @ psi'(conn), which must be
    positive), the class distinctness, and, when ``rho``/``n`` are given,
    the observability ratio rho * n / log(n) which must be large.
    """
    fam = params.family
    lo, hi = fam.clamp_interval
    s = params.props @ s_star_matrix(params)
    gaps = np.abs(s[:, None] - s[None, :])[~np.eye(params.n_blocks, dtype=bool)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EstimationWarning)
        delta = class_distinctness(params)
    report = {
        "props_interior": bool(
            np.all(params.props >= c) and np.all(params.props <= 1.0 - c)
        ),
        "conn_clamp_margin": float(
            min(np.min(params.conn - lo), np.min(hi - params.conn))
        ),
        "identifiability_margin": float(gaps.min()) if gaps.size else math.inf,
        "class_distinctness": delta,
    }
    if rho is not None and n is not None:
        report["observability_ratio"] = float(rho * n / math.log(n)) if n > 1 else math.inf
    return report
