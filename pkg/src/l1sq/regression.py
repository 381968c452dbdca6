"""Exact l1 regression: min_x ||q - A x||_1 for a tall design A.

The workhorse is a primal-dual interior-point method on the epigraph form

    minimize    sum(t)
    subject to  q - A x <= t,      (multipliers lam1 >= 0)
                -(q - A x) <= t,   (multipliers lam2 >= 0)

which has 2D inequality constraints in the r + D variables (x, t).  Each
Newton step is reduced by block elimination to an r x r positive-definite
normal-equations solve, so the per-iteration cost is O(D r^2) plus a handful
of length-D vector operations — the t block is diagonal and never formed.

Writing f1 = (q - A x) - t and f2 = -(q - A x) - t (both kept < 0) and
eliminating the multiplier and t updates from the linearized KKT system
leaves, with

    sig1 = -lam1/f1 - lam2/f2,   sig2 = lam1/f1 - lam2/f2,
    sigx = sig1 - sig2^2 / sig1,

the reduced system  (A' diag(sigx) A) dx = w1p  where

    w1  = (1/tau) A' (1/f2 - 1/f1),
    w2  = -1 - (1/tau) (1/f1 + 1/f2),
    w1p = w1 + A' ((sig2/sig1) * w2),

after which dt = (w2 + sig2 * (A dx)) / sig1 and the multiplier steps follow
in closed form.  sigx > 0 whenever lam > 0 and f < 0, since
sig1^2 - sig2^2 = 4 lam1 lam2 / (f1 f2) > 0.

The surrogate duality gap is sdg = -(f1.lam1 + f2.lam2); the barrier weight
is re-centered every step via tau = mu * 2D / sdg.  Step lengths keep a 0.99
margin to the boundary {lam > 0, f < 0} and then backtrack until the full
KKT residual norm decreases.

A subset-enumeration oracle (solve_l1_oracle) provides an independent second
route for small instances: some optimum of the l1 problem interpolates r
linearly independent rows of A exactly, so trying every r-subset and keeping
the best interpolant is exact.  The two routes share no code beyond operand
validation, which is what makes their agreement in tests meaningful.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    ConfigInvalid,
    DegenerateDesign,
    InstanceTooLarge,
    NumericalBreakdown,
    RankDeficient,
    ShapeMismatch,
)
from .linalg import Subspace, as_matrix, as_vector

#: Static Tikhonov shift added to the normal-equations diagonal.  Far below
#: any meaningful curvature scale, so optima are not measurably moved, but it
#: keeps the Cholesky factorization alive when sigx spreads over many decades
#: near convergence.
NORMAL_EQ_REGULARIZATION = 1e-12

#: Oracle enumeration limits: C(16, 4) = 1820 subsets at worst.
ORACLE_MAX_ROWS = 16
ORACLE_MAX_RANK = 4

#: Relative |det| threshold below which an r x r row subset counts singular.
ORACLE_DET_TOL = 1e-12

_BOUNDARY = 0.99  # fraction of the step to the constraint boundary
_BACKTRACK = 0.5  # step shrink factor in the residual line search
_MAX_BACKTRACK = 32

#: solve_l1_many runs its vectorized kernel only up to this many rows per
#: instance; above it, per-instance BLAS beats broadcast vector ops (measured
#: crossover sits between 500 and 2000 rows) and the batch degrades to a
#: plain loop over solve_l1.
BATCH_MAX_ROWS = 512


@dataclass(frozen=True)
class SolverConfig:
    """Interior-point solver knobs.

    tol is the relative surrogate-gap target: the solver stops once
    sdg <= tol * max(1, objective).  mu is the centering aggressiveness
    (barrier weight tau = mu * 2D / sdg); 10 is the usual long-step choice.
    """

    tol: float = 1e-8
    max_iter: int = 100
    mu: float = 10.0

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigInvalid(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigInvalid(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.mu > 1:
            raise ConfigInvalid(f"mu must exceed 1, got {self.mu}")


DEFAULT_CONFIG = SolverConfig()


@dataclass(frozen=True)
class RegressionSolution:
    """Result of an l1 regression solve.

    ``dual`` (when the interior-point route produced one) is the vector
    nu = lam1 - lam2 certifying optimality: ||nu||_inf <= 1 + O(tol),
    A' nu ~ 0, and nu . q lower-bounds the objective by weak duality.
    ``gap`` is the final surrogate duality gap; ``converged`` is False when
    the iteration budget ran out first, in which case the best iterate is
    still returned.
    """

    x_star: np.ndarray = field(repr=False)
    residual: np.ndarray = field(repr=False)
    objective: float
    gap: float
    iterations: int
    converged: bool
    dual: np.ndarray | None = field(repr=False, default=None)


def _validated_instance(a, q) -> tuple[np.ndarray, np.ndarray]:
    a = as_matrix(a, "design matrix")
    q = as_vector(q, "target")
    if a.shape[0] != q.shape[0]:
        raise ShapeMismatch(
            f"design has {a.shape[0]} rows but target has length {q.shape[0]}"
        )
    if a.shape[0] < a.shape[1]:
        raise ShapeMismatch(
            f"design is {a.shape[0]}x{a.shape[1]}; need at least as many "
            "rows as columns"
        )
    return a, q


def solve_l1(a, q, config: SolverConfig | None = None) -> RegressionSolution:
    """Minimize ||q - A x||_1 by the primal-dual interior-point method.

    A must be D x r with full column rank (RankDeficient otherwise) and
    D >= r >= 1.  Returns the best iterate with converged=False if max_iter
    is exhausted; raises NumericalBreakdown only if a Newton system is
    singular beyond the static regularization.
    """
    cfg = config or DEFAULT_CONFIG
    a, q = _validated_instance(a, q)
    big_d, r = a.shape

    x, _, rank, _ = scipy.linalg.lstsq(a, q, cond=1e-12, lapack_driver="gelsy")
    if rank < r:
        raise RankDeficient(
            f"design matrix has numerical rank {rank} < {r} columns"
        )

    res = q - a @ x
    # Proportional slack keeps the initial multipliers -1/f on one scale
    # even when residual entries span decades (heavy-tailed targets); an
    # absolute offset would let a single large entry crush the boundary
    # step length for everyone.
    peak = np.abs(res).max()
    t = 0.95 * np.abs(res) + (0.1 * peak if peak > 0 else 1.0)
    f1 = res - t
    f2 = -res - t
    lam1 = -1.0 / f1
    lam2 = -1.0 / f2
    two_d = 2.0 * big_d

    iterations = 0
    converged = False
    sdg = -(f1 @ lam1 + f2 @ lam2)  # equals 2D at the initial point

    for _ in range(cfg.max_iter):
        objective = float(np.abs(res).sum())
        if sdg <= cfg.tol * max(1.0, objective):
            converged = True
            break
        iterations += 1

        tau = cfg.mu * two_d / sdg
        inv_tau = 1.0 / tau
        inv_f1 = 1.0 / f1
        inv_f2 = 1.0 / f2
        lf1 = lam1 * inv_f1
        lf2 = lam2 * inv_f2
        sig1 = -lf1 - lf2
        sig2 = lf1 - lf2
        sigx = sig1 - sig2 * sig2 / sig1

        w2 = -1.0 - inv_tau * (inv_f1 + inv_f2)
        w1p = a.T @ (inv_tau * (inv_f2 - inv_f1) + (sig2 / sig1) * w2)

        h = a.T @ (sigx[:, None] * a)
        h.flat[:: r + 1] += NORMAL_EQ_REGULARIZATION
        try:
            chol = scipy.linalg.cho_factor(h, check_finite=False)
        except scipy.linalg.LinAlgError as exc:
            raise NumericalBreakdown(
                f"Newton system singular at iteration {iterations} "
                "despite regularization"
            ) from exc
        dx = scipy.linalg.cho_solve(chol, w1p, check_finite=False)

        adx = a @ dx
        dt = (w2 + sig2 * adx) / sig1
        dlam1 = lf1 * (adx + dt) - lam1 - inv_tau * inv_f1
        dlam2 = lf2 * (-adx + dt) - lam2 - inv_tau * inv_f2
        df1 = -adx - dt
        df2 = adx - dt

        # Longest step keeping lam > 0 and f < 0, with a 0.99 margin.
        with np.errstate(divide="ignore", invalid="ignore"):
            s = min(
                1.0,
                np.where(dlam1 < 0, -lam1 / dlam1, np.inf).min(),
                np.where(dlam2 < 0, -lam2 / dlam2, np.inf).min(),
                np.where(df1 > 0, -f1 / df1, np.inf).min(),
                np.where(df2 > 0, -f2 / df2, np.inf).min(),
            )
        s *= _BOUNDARY

        rnorm = _kkt_residual_norm(a, lam1, lam2, f1, f2, inv_tau)
        ok = False
        for _ in range(_MAX_BACKTRACK):
            lam1_n = lam1 + s * dlam1
            lam2_n = lam2 + s * dlam2
            f1_n = f1 + s * df1
            f2_n = f2 + s * df2
            rnorm_n = _kkt_residual_norm(a, lam1_n, lam2_n, f1_n, f2_n, inv_tau)
            if rnorm_n <= (1.0 - 0.01 * s) * rnorm:
                ok = True
                break
            s *= _BACKTRACK
        if not ok:
            # Line search cannot make progress; return the current iterate
            # and let the caller judge it by the reported gap.
            break

        x = x + s * dx
        res = res - s * adx
        t = t + s * dt
        lam1, lam2, f1, f2 = lam1_n, lam2_n, f1_n, f2_n
        sdg = -(f1 @ lam1 + f2 @ lam2)
    else:
        # Loop ran to max_iter without the gap test passing.
        objective = float(np.abs(res).sum())
        converged = sdg <= cfg.tol * max(1.0, objective)

    res = q - a @ x  # exact at the returned iterate, not the running update
    objective = float(np.abs(res).sum())
    if not converged:
        converged = sdg <= cfg.tol * max(1.0, objective)
    return RegressionSolution(
        x_star=x.copy(),
        residual=res,
        objective=objective,
        gap=float(sdg),
        iterations=iterations,
        converged=converged,
        dual=lam1 - lam2,
    )


def _kkt_residual_norm(a, lam1, lam2, f1, f2, inv_tau) -> float:
    """Euclidean norm of the full primal-dual KKT residual."""
    r_x = a.T @ (lam2 - lam1)
    r_t = 1.0 - lam1 - lam2
    r_c1 = -lam1 * f1 - inv_tau
    r_c2 = -lam2 * f2 - inv_tau
    return float(
        np.sqrt(r_x @ r_x + r_t @ r_t + r_c1 @ r_c1 + r_c2 @ r_c2)
    )


def solve_l1_many(designs, q, config: SolverConfig | None = None) -> list[RegressionSolution]:
    """Solve min_x ||q_b - A_b x||_1 for a stack of designs.

    ``designs`` is (B, D, r) (or a sequence of equal-shape D x r matrices).
    ``q`` is either a single length-D target shared by every instance, or a
    (B, D) matrix pairing each design with its own target.  Every instance
    runs the same interior-point iteration as solve_l1, but vectorized
    across the batch so the per-call interpreter cost is paid once instead
    of B times.  Instances converge independently: a finished row is frozen
    (its step length pinned to zero) while the rest continue.  Agreement
    with the sequential route is to solver accuracy, not bit level, because
    batched reductions may round differently.

    Above BATCH_MAX_ROWS rows per instance the call transparently becomes a
    loop over solve_l1 — for tall instances per-instance BLAS is faster than
    broadcast vector ops, and the batch dimension no longer pays.

    This is the throughput path used by the search engine: one query against
    every database subspace at once (shared target), or every repetition of
    a sketched query against every projected subspace (per-instance target).
    """
    cfg = config or DEFAULT_CONFIG
    a = np.ascontiguousarray(designs, dtype=np.float64)
    if a.ndim != 3:
        raise ShapeMismatch(f"designs must stack as (B, D, r), got ndim={a.ndim}")
    n_batch, big_d, r = a.shape
    if n_batch == 0:
        return []
    if not np.all(np.isfinite(a)):
        raise ValueError("designs contain non-finite entries")
    if big_d < r:
        raise ShapeMismatch(
            f"designs are {big_d}x{r}; need at least as many rows as columns"
        )
    if np.ndim(q) == 2:
        q = as_matrix(q, "targets")
        if q.shape != (n_batch, big_d):
            raise ShapeMismatch(
                f"targets are {q.shape[0]}x{q.shape[1]}; designs need "
                f"({n_batch}, {big_d})"
            )
    else:
        q = as_vector(q, "target")
        if q.shape[0] != big_d:
            raise ShapeMismatch(
                f"designs have {big_d} rows but target has length {q.shape[0]}"
            )

    if n_batch == 1 or big_d > BATCH_MAX_ROWS:
        return [
            solve_l1(a[b], q if q.ndim == 1 else q[b], cfg) for b in range(n_batch)
        ]

    at = a.transpose(0, 2, 1)
    qr_q, qr_r = np.linalg.qr(a)
    rdiag = np.abs(np.diagonal(qr_r, axis1=1, axis2=2))
    deficient = rdiag.min(axis=1) <= 1e-12 * rdiag.max(axis=1)
    if deficient.any():
        raise RankDeficient(
            f"designs at batch positions {np.flatnonzero(deficient).tolist()} "
            "are numerically rank deficient"
        )
    if q.ndim == 1:
        proj = np.matmul(qr_q.transpose(0, 2, 1), q)
    else:
        proj = np.einsum("bdk,bd->bk", qr_q, q)
    x = np.linalg.solve(qr_r, proj[..., None])[..., 0]

    res = q - np.matmul(a, x[..., None])[..., 0]
    peak = np.abs(res).max(axis=1, keepdims=True)
    t = 0.95 * np.abs(res) + np.where(peak > 0, 0.1 * peak, 1.0)
    f1 = res - t
    f2 = -res - t
    lam1 = -1.0 / f1
    lam2 = -1.0 / f2
    two_d = 2.0 * big_d
    eye_r = np.eye(r)

    sdg = -np.einsum("bd,bd->b", f1, lam1) - np.einsum("bd,bd->b", f2, lam2)
    iterations = np.zeros(n_batch, dtype=np.int64)
    active = np.ones(n_batch, dtype=bool)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(cfg.max_iter):
            objective = np.abs(res).sum(axis=1)
            active &= sdg > cfg.tol * np.maximum(1.0, objective)
            if not active.any():
                break
            iterations[active] += 1

            inv_tau = sdg / (cfg.mu * two_d)  # (B,), = 1/tau per row
            inv_f1 = 1.0 / f1
            inv_f2 = 1.0 / f2
            lf1 = lam1 * inv_f1
            lf2 = lam2 * inv_f2
            sig1 = -lf1 - lf2
            sig2 = lf1 - lf2
            sigx = sig1 - sig2 * sig2 / sig1

            itau = inv_tau[:, None]
            w2 = -1.0 - itau * (inv_f1 + inv_f2)
            w1p = np.matmul(
                at, (itau * (inv_f2 - inv_f1) + (sig2 / sig1) * w2)[..., None]
            )[..., 0]

            h = np.matmul(at, sigx[..., None] * a)
            h[~active] = eye_r
            h += NORMAL_EQ_REGULARIZATION * eye_r
            try:
                dx = np.linalg.solve(h, w1p[..., None])[..., 0]
            except np.linalg.LinAlgError as exc:
                raise NumericalBreakdown(
                    "batched Newton system singular despite regularization"
                ) from exc

            adx = np.matmul(a, dx[..., None])[..., 0]
            dt = (w2 + sig2 * adx) / sig1
            dlam1 = lf1 * (adx + dt) - lam1 - itau * inv_f1
            dlam2 = lf2 * (-adx + dt) - lam2 - itau * inv_f2
            df1 = -adx - dt
            df2 = adx - dt

            # Frozen rows can carry inf/nan through the (discarded) step
            # algebra above; zero their updates so 0 * nan never reaches the
            # state arrays.
            inactive = ~active
            if inactive.any():
                for upd in (dx, adx, dt, dlam1, dlam2, df1, df2):
                    upd[inactive] = 0.0

            s = np.minimum(
                1.0,
                np.minimum(
                    np.where(dlam1 < 0, -lam1 / dlam1, np.inf).min(axis=1),
                    np.where(dlam2 < 0, -lam2 / dlam2, np.inf).min(axis=1),
                ),
            )
            s = np.minimum(
                s,
                np.minimum(
                    np.where(df1 > 0, -f1 / df1, np.inf).min(axis=1),
                    np.where(df2 > 0, -f2 / df2, np.inf).min(axis=1),
                ),
            )
            s *= _BOUNDARY
            s[~active] = 0.0

            rnorm = _kkt_residual_norm_rows(at, lam1, lam2, f1, f2, itau)
            pending = active.copy()
            for _ in range(_MAX_BACKTRACK):
                sc = s[:, None]
                rnorm_new = _kkt_residual_norm_rows(
                    at, lam1 + sc * dlam1, lam2 + sc * dlam2,
                    f1 + sc * df1, f2 + sc * df2, itau,
                )
                pending &= ~(rnorm_new <= (1.0 - 0.01 * s) * rnorm)
                if not pending.any():
                    break
                s[pending] *= _BACKTRACK
            # Rows whose line search is stuck stop iterating; the final gap
            # check below decides whether they count as converged.
            s[pending] = 0.0
            active &= ~pending

            sc = s[:, None]
            x += s[:, None] * dx
            res -= sc * adx
            t += sc * dt
            lam1 += sc * dlam1
            lam2 += sc * dlam2
            f1 += sc * df1
            f2 += sc * df2
            sdg = -np.einsum("bd,bd->b", f1, lam1) - np.einsum("bd,bd->b", f2, lam2)

    res = q - np.matmul(a, x[..., None])[..., 0]
    objective = np.abs(res).sum(axis=1)
    converged = sdg <= cfg.tol * np.maximum(1.0, objective)
    nu = lam1 - lam2
    return [
        RegressionSolution(
            x_star=x[b].copy(),
            residual=res[b].copy(),
            objective=float(objective[b]),
            gap=float(sdg[b]),
            iterations=int(iterations[b]),
            converged=bool(converged[b]),
            dual=nu[b].copy(),
        )
        for b in range(n_batch)
    ]


def _kkt_residual_norm_rows(at, lam1, lam2, f1, f2, itau) -> np.ndarray:
    """Per-row KKT residual norms for a batch; itau is (B, 1)."""
    r_x = np.matmul(at, (lam2 - lam1)[..., None])[..., 0]
    r_t = 1.0 - lam1 - lam2
    r_c1 = -lam1 * f1 - itau
    r_c2 = -lam2 * f2 - itau
    return np.sqrt(
        np.einsum("br,br->b", r_x, r_x)
        + np.einsum("bd,bd->b", r_t, r_t)
        + np.einsum("bd,bd->b", r_c1, r_c1)
        + np.einsum("bd,bd->b", r_c2, r_c2)
    )


def solve_l1_oracle(a, q, config: SolverConfig | None = None) -> RegressionSolution:
    """Exact l1 regression by enumerating r-row interpolants.

    Some minimizer of ||q - A x||_1 interpolates r linearly independent rows
    of A exactly (an LP vertex), so for small instances trying every r-subset
    is an exact, independent check on the interior-point route.  Limits:
    D <= 16 rows, r <= 4 columns; InstanceTooLarge beyond that.  Subsets
    whose |det| falls below ORACLE_DET_TOL relative to the Hadamard bound
    (product of row norms) are skipped as singular; if every subset is
    skipped the design is DegenerateDesign.  Objective ties keep the
    lexicographically smallest subset because enumeration is in
    lexicographic order and only strict improvement replaces the incumbent.

    ``config`` is accepted for signature parity and ignored.
    """
    del config
    a, q = _validated_instance(a, q)
    big_d, r = a.shape
    if big_d > ORACLE_MAX_ROWS or r > ORACLE_MAX_RANK:
        raise InstanceTooLarge(
            f"oracle handles at most {ORACLE_MAX_ROWS} rows and rank "
            f"{ORACLE_MAX_RANK}, got {big_d}x{r}"
        )

    row_norms = np.sqrt((a * a).sum(axis=1))
    best_obj = np.inf
    best_x = None
    evaluated = 0
    for subset in itertools.combinations(range(big_d), r):
        sub = a[list(subset)]
        scale = float(np.prod(row_norms[list(subset)]))
        det = float(np.linalg.det(sub))
        if abs(det) <= ORACLE_DET_TOL * max(1.0, scale):
            continue
        evaluated += 1
        x = np.linalg.solve(sub, q[list(subset)])
        obj = float(np.abs(q - a @ x).sum())
        if obj < best_obj:
            best_obj = obj
            best_x = x
    if best_x is None:
        raise DegenerateDesign(
            "every row subset is singular at the det tolerance; "
            "the design has no invertible r x r block"
        )
    return RegressionSolution(
        x_star=best_x,
        residual=q - a @ best_x,
        objective=best_obj,
        gap=0.0,
        iterations=evaluated,
        converged=True,
        dual=None,
    )


def point_to_subspace_distance(
    q, subspace: Subspace, config: SolverConfig | None = None
) -> float:
    """d_l1(q, S) = min over v in S of ||q - v||_1, solved exactly."""
    q = as_vector(q, "query")
    if q.shape[0] != subspace.ambient_dim:
        raise ShapeMismatch(
            f"query has length {q.shape[0]} but subspace lives in "
            f"R^{subspace.ambient_dim}"
        )
    return solve_l1(subspace.basis, q, config).objective
