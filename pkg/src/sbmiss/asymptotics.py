"""Closed-form limit-theory quantities used as oracles by the harness.

Covers the limit covariances of the complete-data estimators, the
conditional expectation of the plug-in cell means, the expected
conditional log-likelihood ratio (ELR) and its profile over the
connectivity, the local separation bound, and a numerical check of the
local quadratic expansion of the complete likelihood.

Two summation conventions are exposed wherever they differ at finite n:
``"offdiag"`` sums over ordered pairs i != j exactly like the
likelihood, ``"product"`` uses the n^2 product form of the closed
formulas.  They agree to O(1/n); tests use ``"offdiag"`` so exact
finite-n oracles match to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .inference import _complete_loglik_raw
from .model import (
    Assignment,
    SbmParams,
    class_distinctness,
    confusion_matrix,
    s_star_matrix,
)
from .sampling import rho_hat

__all__ = [
    "TheoreticalLimits",
    "sigma_props",
    "sigma_conn_cell",
    "sigma_conn",
    "theoretical_limits",
    "ybar",
    "elr",
    "profile_elr",
    "profile_local_bound",
    "lan_curvature_check",
    "proportion_direction",
    "connectivity_direction",
]

CONVENTIONS = ("offdiag", "product")


def sigma_props(p_star) -> np.ndarray:
    """Limit covariance of sqrt(n) (p_hat - p*): Diag(p*) - p* p*^T."""
    p = np.asarray(p_star, dtype=float)
    return np.diag(p) - np.outer(p, p)


def sigma_conn_cell(p_star, a_star, rho: float, family, q: int, l: int) -> float:
    """Limit variance of sqrt(n(n-1)) (a_hat_ql - a*_ql).

    1 / (rho * p_q * p_l * psi''(a_ql)); the whole matrix scales as
    1/rho, the variance cost of missing dyads.
    """
    if rho <= 0:
        raise DomainError("rho must be positive")
    p = np.asarray(p_star, dtype=float)
    a = np.asarray(a_star, dtype=float)
    return float(1.0 / (rho * p[q] * p[l] * family.psi_double_prime(a[q, l])))


def sigma_conn(params_star: SbmParams, rho: float) -> np.ndarray:
    """Matrix of per-cell limit variances of the connectivity estimates."""
    if rho <= 0:
        raise DomainError("rho must be positive")
    p = params_star.props
    v = params_star.family.psi_double_prime(params_star.conn)
    return 1.0 / (rho * np.outer(p, p) * v)


@dataclass(frozen=True)
class TheoreticalLimits:
    """Reference covariances attached to experiment reports."""

    sigma_props: np.ndarray
    sigma_conn: np.ndarray
    rho: float


def theoretical_limits(params_star: SbmParams, rho: float) -> TheoreticalLimits:
    return TheoreticalLimits(
        sigma_props=sigma_props(params_star.props),
        sigma_conn=sigma_conn(params_star, rho),
        rho=rho,
    )


# --------------------------------------------------------------------------
# expected cell means and expected likelihood ratios
# --------------------------------------------------------------------------


def _check_pair(z: Assignment, z_star: Assignment) -> None:
    if z.n != z_star.n or z.n_blocks != z_star.n_blocks:
        raise ValueError("assignments must share n and the block count")


def _ybar_parts(z: Assignment, z_star: Assignment, params_star: SbmParams, pairs: str):
    """Per-cell numerator and pair count under the chosen convention."""
    if pairs not in ("all", "offdiag"):
        raise ValueError(f"pairs must be 'all' or 'offdiag', got {pairs!r}")
    n = z.n
    r = confusion_matrix(z, z_star)
    s = s_star_matrix(params_star)
    phat = z.proportions()
    num = n**2 * (r.T @ s @ r)
    den = n**2 * np.outer(phat, phat)
    if pairs == "offdiag":
        self_num = n * (r * np.diag(s)[:, None]).sum(axis=0)
        num[np.diag_indices_from(num)] -= self_num
        den[np.diag_indices_from(den)] -= n * phat
    return num, den


def ybar(
    z: Assignment, z_star: Assignment, params_star: SbmParams, pairs: str = "all"
) -> np.ndarray:
    """Expectation of the plug-in cell means given the true labels.

    Cell (q, l) is [R^T S* R]_ql / (phat_q phat_l) with R the confusion
    matrix and S* the true mean matrix; cells without any dyad are 0 by
    convention.  The expectation does not involve the observation
    probability, which integrates out of the ratio.  ``pairs="all"`` is
    the product closed form; ``pairs="offdiag"`` excludes self-pairs and
    is the exact finite-n expectation of the estimator (the two differ
    only on diagonal cells, by O(1/n)).
    """
    _check_pair(z, z_star)
    num, den = _ybar_parts(z, z_star, params_star, pairs)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0.5)


def _elr_from_conn(
    conn, z: Assignment, z_star: Assignment, params_star: SbmParams, rho, convention
) -> float:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    if not 0.0 < rho <= 1.0:
        raise DomainError("rho must lie in (0, 1]")
    n = z.n
    fam = params_star.family
    cs = params_star.conn
    r = confusion_matrix(z, z_star)
    kl4 = np.asarray(fam.kl(cs[:, :, None, None], conn[None, None, :, :]))
    total = n**2 * float(np.einsum("qp,lm,qlpm->", r, r, kl4))
    if convention == "offdiag":
        kl_diag = np.asarray(fam.kl(np.diag(cs)[:, None], np.diag(conn)[None, :]))
        total -= n * float(np.einsum("qp,qp->", r, kl_diag))
    return -rho * total + 0.0


def elr(
    params: SbmParams,
    z: Assignment,
    z_star: Assignment,
    params_star: SbmParams,
    rho: float,
    convention: str = "offdiag",
) -> float:
    """Expected conditional log-likelihood ratio of (params, z) against the truth.

    Closed form: -rho * sum over cell pairs of confusion-weighted KL
    divergences; always <= 0, and exactly 0 at the truth (and its
    relabelings).  Only the connectivity of ``params`` enters.
    ``convention="offdiag"`` matches the likelihood's sum over ordered
    pairs i != j exactly at finite n; ``"product"`` keeps the n^2 product
    form of the closed formula.
    """
    _check_pair(z, z_star)
    return _elr_from_conn(params.conn, z, z_star, params_star, rho, convention)


def _profile_conn(
    z: Assignment, z_star: Assignment, params_star: SbmParams, convention: str
) -> np.ndarray:
    pairs = "offdiag" if convention == "offdiag" else "all"
    num, den = _ybar_parts(z, z_star, params_star, pairs)
    fam = params_star.family
    nonempty = den > 0.5
    means = np.divide(num, den, out=np.zeros_like(num), where=nonempty)
    # cells without any dyad get zero weight in the ratio; any interior
    # value works there
    s = s_star_matrix(params_star)
    fallback = float(fam.natural_from_mean(fam.clamp_mean(float(s.mean()))))
    conn = np.full(means.shape, fallback)
    conn[nonempty] = fam.natural_from_mean(means[nonempty])
    return conn


def profile_elr(
    z: Assignment,
    z_star: Assignment,
    params_star: SbmParams,
    rho: float,
    convention: str = "offdiag",
) -> float:
    """ELR at its exact connectivity maximizer: the inverse mean map of
    the expected cell means.

    Equals the maximum of ``elr`` over the connectivity (under the same
    convention); 0 exactly when ``z`` is a relabeling of the truth, and
    invariant under relabelings of ``z``.
    """
    _check_pair(z, z_star)
    conn_bar = _profile_conn(z, z_star, params_star, convention)
    return _elr_from_conn(conn_bar, z, z_star, params_star, rho, convention)


def profile_local_bound(
    params_star: SbmParams, rho: float, n: int, distance: int, c: float
) -> float:
    """Local separation slope: -c * rho * n * (3/4) * delta * distance.

    The profile ratio of any assignment near a c/2-regular truth sits
    below this line, with ``distance`` the permutation-invariant
    disagreement count and delta the class distinctness of the truth.
    """
    return -c * rho * n * 0.75 * class_distinctness(params_star) * distance


# --------------------------------------------------------------------------
# local quadratic expansion of the complete likelihood
# --------------------------------------------------------------------------


def proportion_direction(q: int, q2: int, n_blocks: int):
    """Sum-zero proportion contrast e_q - e_q2, paired with a zero
    connectivity direction."""
    s = np.zeros(n_blocks)
    s[q], s[q2] = 1.0, -1.0
    return s, np.zeros((n_blocks, n_blocks))


def connectivity_direction(q: int, l: int, n_blocks: int):
    """Single connectivity cell direction, paired with a zero proportion
    direction."""
    u = np.zeros((n_blocks, n_blocks))
    u[q, l] = 1.0
    return np.zeros(n_blocks), u


def lan_curvature_check(
    g,
    z_star: Assignment,
    params_star: SbmParams,
    directions,
    rho: float | None = None,
) -> list[dict]:
    """Fit the local quadratic behavior of the complete likelihood and
    compare its curvature with the theoretical one.

    Each direction is a pair (s, u); the likelihood is evaluated at the
    truth shifted by t * (s / sqrt(n), u / sqrt(n(n-1))) for t = -1, 0, 1
    and split into a linear and a quadratic coefficient by central
    differences.  The reference curvature is
    -(1/2) (sum_q s_q^2 / p*_q + sum_ql u_ql^2 rho p*_q p*_l psi''(a*_ql)),
    the inverse of the limit variances.  Across replicates the linear
    coefficient is a centered score.
    """
    if rho is None:
        rho = rho_hat(g.mask)
    n = g.n
    fam = params_star.family
    p, a = params_star.props, params_star.conn
    scale_p, scale_a = np.sqrt(n), np.sqrt(n * (n - 1))
    f0 = _complete_loglik_raw(g, z_star, p, a, fam)
    counts = z_star.counts()
    out = []
    for s, u in directions:
        s = np.asarray(s, dtype=float)
        u = np.asarray(u, dtype=float)

        def shifted(t):
            props_t = p + t * s / scale_p
            if np.any(props_t[counts > 0] <= 0):
                raise DomainError("shifted proportions left the positive cone")
            return _complete_loglik_raw(g, z_star, props_t, a + t * u / scale_a, fam)

        f_plus, f_minus = shifted(1.0) - f0, shifted(-1.0) - f0
        quad = 0.5 * (f_plus + f_minus)
        theory = -0.5 * float(
            np.sum(np.square(s) / p)
            + np.sum(np.square(u) * rho * np.outer(p, p) * fam.psi_double_prime(a))
        )
        out.append(
            {
                "linear_term": 0.5 * (f_plus - f_minus),
                "quadratic_term": quad,
                "theory_quadratic": theory,
                "abs_error": abs(quad - theory),
                "rel_error": abs(quad - theory) / abs(theory) if theory != 0 else abs(quad),
            }
        )
    return out
