"""Self-contained dense numerical kernels.

Symmetric eigendecomposition (cyclic Jacobi), PSD-cone projection, a small
projected-gradient QP solver for simplex-like constraints, a dense two-phase
simplex LP solver, and a finite-difference gradient checker.

Everything here is sized for desk-scale problems (matrices up to a few
hundred rows, a few dozen LP/QP variables).  The Jacobi sweep is the hot
loop and carries a numba implementation next to the pure-numpy one; see
``_accel``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import _accel
from ._accel import njit

__all__ = [
    "SymEigResult",
    "QpProblem",
    "QpSolution",
    "InfeasibleProblemError",
    "UnboundedProblemError",
    "sym_eig",
    "psd_project",
    "solve_qp",
    "solve_lp",
    "check_gradient",
]


class InfeasibleProblemError(ValueError):
    """The constraint set of an optimization problem is empty."""


class UnboundedProblemError(ValueError):
    """The objective is unbounded below on the feasible set."""


@dataclass(frozen=True)
class SymEigResult:
    """Eigendecomposition of a symmetric matrix.

    ``eigenvalues`` are ascending; column ``i`` of ``eigenvectors`` pairs
    with ``eigenvalues[i]``.  The sign of each eigenvector is fixed so that
    its largest-magnitude component is nonnegative (first such component on
    ties), which keeps test fixtures stable.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


# ---------------------------------------------------------------------------
# cyclic Jacobi eigensolver
# ---------------------------------------------------------------------------


def _jacobi_cycle_np(a: np.ndarray, v: np.ndarray, sweep: int, tresh: float) -> None:
    """One cyclic Jacobi sweep; only the upper triangle of ``a`` is kept live."""
    n = a.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = a[p, q]
            if apq == 0.0:
                continue
            app = a[p, p]
            aqq = a[q, q]
            g = 100.0 * abs(apq)
            # element already negligible at working precision: zero and move on
            if sweep > 3 and abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                a[p, q] = 0.0
                continue
            if abs(apq) <= tresh:
                continue
            tau = (aqq - app) / (2.0 * apq)
            if tau >= 0.0:
                t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
            else:
                t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            top_p = a[:p, p].copy()
            top_q = a[:p, q].copy()
            a[:p, p] = c * top_p - s * top_q
            a[:p, q] = s * top_p + c * top_q
            mid_p = a[p, p + 1 : q].copy()
            mid_q = a[p + 1 : q, q].copy()
            a[p, p + 1 : q] = c * mid_p - s * mid_q
            a[p + 1 : q, q] = s * mid_p + c * mid_q
            tail_p = a[p, q + 1 :].copy()
            tail_q = a[q, q + 1 :].copy()
            a[p, q + 1 :] = c * tail_p - s * tail_q
            a[q, q + 1 :] = s * tail_p + c * tail_q
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            vp = v[:, p].copy()
            vq = v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq


@njit(cache=True)
def _jacobi_cycle_nb(a, v, sweep, tresh):  # pragma: no cover - mirror of numpy path
    n = a.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = a[p, q]
            if apq == 0.0:
                continue
            app = a[p, p]
            aqq = a[q, q]
            g = 100.0 * abs(apq)
            if sweep > 3 and abs(app) + g == abs(app) and abs(aqq) + g == abs(aqq):
                a[p, q] = 0.0
                continue
            if abs(apq) <= tresh:
                continue
            tau = (aqq - app) / (2.0 * apq)
            if tau >= 0.0:
                t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
            else:
                t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            for j in range(p):
                ajp = a[j, p]
                ajq = a[j, q]
                a[j, p] = c * ajp - s * ajq
                a[j, q] = s * ajp + c * ajq
            for j in range(p + 1, q):
                apj = a[p, j]
                ajq = a[j, q]
                a[p, j] = c * apj - s * ajq
                a[j, q] = s * apj + c * ajq
            for j in range(q + 1, n):
                apj = a[p, j]
                aqj = a[q, j]
                a[p, j] = c * apj - s * aqj
                a[q, j] = s * apj + c * aqj
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            for j in range(n):
                vjp = v[j, p]
                vjq = v[j, q]
                v[j, p] = c * vjp - s * vjq
                v[j, q] = s * vjp + c * vjq


def _upper_off_stats(a: np.ndarray) -> tuple[float, float]:
    """(Frobenius norm, absolute sum) of the off-diagonal upper triangle."""
    upper = a[np.triu_indices(a.shape[0], k=1)]
    return float(np.sqrt(2.0 * np.dot(upper, upper))), float(np.abs(upper).sum())


def sym_eig(
    a: np.ndarray,
    *,
    tol: float = 1e-14,
    max_sweeps: int = 60,
    use_numba: Optional[bool] = None,
) -> SymEigResult:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    The input is symmetrized as ``(A + A.T) / 2`` first.  Sweeps stop once
    the off-diagonal Frobenius norm drops below ``tol * ||A||_F``.  Early
    sweeps skip rotations below a shrinking threshold (the classic cyclic
    Jacobi heuristic), which does not change the fixed point.

    ``use_numba`` overrides the global acceleration flag (used by the
    benchmark and the backend-equivalence tests).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains non-finite entries")
    n = a.shape[0]
    work = (a + a.T) / 2.0
    vecs = np.eye(n)
    scale = float(np.linalg.norm(work))
    if n > 1 and scale > 0.0:
        numba_path = _accel.NUMBA_ENABLED if use_numba is None else use_numba
        cycle = _jacobi_cycle_nb if (numba_path and _accel.HAVE_NUMBA) else _jacobi_cycle_np
        for sweep in range(max_sweeps):
            off_norm, off_sum = _upper_off_stats(work)
            if off_norm <= tol * scale:
                break
            tresh = 0.2 * off_sum / (n * n) if sweep < 3 else 0.0
            cycle(work, vecs, sweep, tresh)
    values = np.diag(work).copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    vecs = vecs[:, order]
    # deterministic sign: largest-|component| of each eigenvector nonnegative
    for i in range(n):
        col = vecs[:, i]
        if col[np.argmax(np.abs(col))] < 0.0:
            vecs[:, i] = -col
    return SymEigResult(eigenvalues=values, eigenvectors=vecs)


def psd_project(a: np.ndarray, *, tol: float = 1e-14) -> np.ndarray:
    """Nearest (Frobenius) PSD matrix: eigendecompose and clip negatives to 0."""
    eig = sym_eig(a, tol=tol)
    clipped = np.maximum(eig.eigenvalues, 0.0)
    out = (eig.eigenvectors * clipped) @ eig.eigenvectors.T
    return (out + out.T) / 2.0


# ---------------------------------------------------------------------------
# QP: minimize a' S a  subject to  a >= 0, a' b = 1
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QpProblem:
    """min aᵀSa over the scaled simplex {a >= 0, aᵀb = 1}, S PSD, b >= 0."""

    s: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("S must be square")
        if b.shape != (s.shape[0],):
            raise ValueError("b must match the size of S")
        if not (np.isfinite(s).all() and np.isfinite(b).all()):
            raise ValueError("QP data contains non-finite entries")
        if np.any(b < 0.0):
            raise ValueError("b must be componentwise nonnegative")
        if not np.any(b > 0.0):
            raise InfeasibleProblemError("no strictly positive entry in b")
        object.__setattr__(self, "s", (s + s.T) / 2.0)
        object.__setattr__(self, "b", b)


class QpSolution(NamedTuple):
    alpha: np.ndarray
    kkt_residual: float


def project_scaled_simplex(v: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, bᵀx = 1} for b >= 0, some b > 0.

    Finite water-filling: x_i = max(0, v_i - mu * b_i) with mu the unique
    root of sum_i b_i x_i = 1.  Components with b_i = 0 decouple and are
    simply clamped at zero.
    """
    v = np.asarray(v, dtype=np.float64)
    x = np.maximum(v, 0.0)
    pos = b > 0.0
    if not np.any(pos):
        raise InfeasibleProblemError("no strictly positive entry in b")
    bp = b[pos]
    vp = v[pos]
    t = vp / bp  # breakpoints of the piecewise-linear constraint function
    order = np.argsort(-t, kind="stable")
    sum_b2 = 0.0
    sum_bv = 0.0
    mu = 0.0
    k = len(order)
    for j in range(k):
        idx = order[j]
        sum_b2 += bp[idx] * bp[idx]
        sum_bv += bp[idx] * vp[idx]
        mu = (sum_bv - 1.0) / sum_b2
        next_t = t[order[j + 1]] if j + 1 < k else -np.inf
        if mu >= next_t:
            break
    xp = np.maximum(vp - mu * bp, 0.0)
    x[pos] = xp
    # remove roundoff drift in the equality constraint
    total = float(bp @ xp)
    if total > 0.0:
        x[pos] = xp / total
    return x


def qp_kkt_residual(prob: QpProblem, alpha: np.ndarray) -> float:
    """Max KKT violation at ``alpha``: stationarity on the support, sign
    condition off it, and the equality constraint itself."""
    grad = 2.0 * (prob.s @ alpha)
    mu = float(alpha @ grad)  # alpha' b = 1  =>  mu = 2 a'Sa
    reduced = grad - mu * prob.b
    active = alpha > 0.0
    res = abs(float(alpha @ prob.b) - 1.0)
    if np.any(active):
        res = max(res, float(np.max(np.abs(reduced[active]))))
    if np.any(~active):
        res = max(res, float(np.max(np.maximum(-reduced[~active], 0.0))))
    return res


def _active_set_refine(prob: QpProblem, alpha: np.ndarray, tol: float) -> Optional[np.ndarray]:
    """Polish a near-solution by solving exact KKT systems on the active set.

    Classic primal active-set iteration for min a'Sa, a >= 0, a'b = 1: solve
    the equality-constrained subproblem on the current support, drop the
    most negative component if one appears, admit the worst violator of the
    sign condition otherwise.  Returns None when the iteration goes nowhere
    (degenerate subproblems); the caller keeps the unpolished iterate then.
    """
    m = prob.b.shape[0]
    active = alpha > max(tol, 1e-12)
    if not np.any(active):
        active[int(np.argmax(prob.b))] = True
    for _ in range(4 * m + 16):
        idx = np.where(active)[0]
        k = idx.size
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = 2.0 * prob.s[np.ix_(idx, idx)]
        kkt[:k, k] = -prob.b[idx]
        kkt[k, :k] = prob.b[idx]
        rhs = np.zeros(k + 1)
        rhs[k] = 1.0
        try:
            solution, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        except np.linalg.LinAlgError:  # pragma: no cover - lstsq rarely raises
            return None
        x = solution[:k]
        mu = solution[k]
        if abs(float(prob.b[idx] @ x) - 1.0) > 1e-8:
            return None
        if np.any(x < -1e-12):
            drop = idx[int(np.argmin(x))]
            active[drop] = False
            if not np.any(active):
                return None
            continue
        candidate = np.zeros(m)
        candidate[idx] = np.maximum(x, 0.0)
        reduced = 2.0 * (prob.s @ candidate) - mu * prob.b
        inactive = ~active
        if np.any(inactive) and float(reduced[inactive].min()) < -tol:
            active[int(np.where(inactive)[0][np.argmin(reduced[inactive])])] = True
            continue
        total = float(candidate @ prob.b)
        return candidate / total if total > 0 else None
    return None


def solve_qp(prob: QpProblem, tol: float = 1e-8, max_iter: int = 100_000) -> QpSolution:
    """Projected gradient descent plus an exact active-set polish.

    The gradient phase uses the fixed step 1/L with L = 2 lambda_max(S) and
    the exact simplex projection; the polishing phase solves the KKT system
    on the identified support, which removes the slow tail the first-order
    iteration has on nearly-duplicated kernels.  The better (by objective)
    feasible point wins.  If neither phase reaches ``tol`` within the caps,
    the best iterate is returned with its residual reported.
    """
    m = prob.b.shape[0]
    alpha = project_scaled_simplex(np.zeros(m), prob.b)
    lam_max = float(sym_eig(prob.s).eigenvalues[-1])
    if lam_max <= 0.0:
        # S is (numerically) zero: every feasible point is optimal
        return QpSolution(alpha, qp_kkt_residual(prob, alpha))
    step = 1.0 / (2.0 * lam_max)
    residual = qp_kkt_residual(prob, alpha)
    gradient_cap = min(max_iter, 2000)
    for iteration in range(max_iter):
        if residual <= tol:
            break
        grad = 2.0 * (prob.s @ alpha)
        alpha = project_scaled_simplex(alpha - step * grad, prob.b)
        residual = qp_kkt_residual(prob, alpha)
        if iteration + 1 >= gradient_cap:
            polished = _active_set_refine(prob, alpha, tol)
            if polished is not None:
                if float(polished @ prob.s @ polished) <= float(alpha @ prob.s @ alpha):
                    alpha = polished
                    residual = qp_kkt_residual(prob, alpha)
            if residual <= tol or gradient_cap >= max_iter:
                break
            gradient_cap = min(max_iter, gradient_cap * 8)
    return QpSolution(alpha, residual)


# ---------------------------------------------------------------------------
# LP: dense two-phase simplex with Bland's rule
# ---------------------------------------------------------------------------


def _simplex_iterate(tableau: np.ndarray, basis: np.ndarray, tol: float, max_iter: int) -> None:
    """Run simplex pivots in place until optimal; Bland's rule, so no cycling."""
    m = len(basis)
    for _ in range(max_iter):
        obj = tableau[m, :-1]
        entering = -1
        for j in range(obj.shape[0]):
            if obj[j] < -tol:
                entering = j
                break
        if entering < 0:
            return
        col = tableau[:m, entering]
        rhs = tableau[:m, -1]
        leaving = -1
        best = np.inf
        for i in range(m):
            if col[i] > tol:
                ratio = rhs[i] / col[i]
                if ratio < best - tol or (abs(ratio - best) <= tol and (leaving < 0 or basis[i] < basis[leaving])):
                    best = ratio
                    leaving = i
        if leaving < 0:
            raise UnboundedProblemError("objective unbounded below")
        pivot = tableau[leaving, entering]
        tableau[leaving, :] /= pivot
        for i in range(m + 1):
            if i != leaving and tableau[i, entering] != 0.0:
                tableau[i, :] -= tableau[i, entering] * tableau[leaving, :]
        basis[leaving] = entering
    raise RuntimeError("simplex iteration cap exceeded")


def solve_lp(
    c: np.ndarray,
    a_eq: Optional[np.ndarray] = None,
    b_eq: Optional[np.ndarray] = None,
    a_ub: Optional[np.ndarray] = None,
    b_ub: Optional[np.ndarray] = None,
    tol: float = 1e-9,
    max_iter: int = 20_000,
) -> np.ndarray:
    """Minimize cᵀx subject to A_eq x = b_eq, A_ub x <= b_ub, x >= 0.

    Dense two-phase tableau simplex, adequate for the tiny alignment LPs
    this package produces.
    """
    c = np.asarray(c, dtype=np.float64)
    q = c.shape[0]
    rows = []
    rhs = []
    n_slack = 0 if a_ub is None else np.asarray(a_ub).shape[0]
    if a_eq is not None:
        a_eq = np.atleast_2d(np.asarray(a_eq, dtype=np.float64))
        for i in range(a_eq.shape[0]):
            row = np.concatenate([a_eq[i], np.zeros(n_slack)])
            rows.append(row)
            rhs.append(float(np.asarray(b_eq, dtype=np.float64).ravel()[i]))
    if a_ub is not None:
        a_ub = np.atleast_2d(np.asarray(a_ub, dtype=np.float64))
        for i in range(a_ub.shape[0]):
            slack = np.zeros(n_slack)
            slack[i] = 1.0
            rows.append(np.concatenate([a_ub[i], slack]))
            rhs.append(float(np.asarray(b_ub, dtype=np.float64).ravel()[i]))
    if not rows:
        raise ValueError("at least one constraint is required")
    a = np.array(rows)
    b = np.array(rhs)
    neg = b < 0.0
    a[neg] *= -1.0
    b[neg] *= -1.0
    m, n = a.shape

    # phase 1: artificial basis, minimize sum of artificials
    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = a
    tableau[:m, n : n + m] = np.eye(m)
    tableau[:m, -1] = b
    tableau[m, n : n + m] = 1.0
    tableau[m, :] -= tableau[:m, :].sum(axis=0)
    basis = np.arange(n, n + m)
    _simplex_iterate(tableau, basis, tol, max_iter)
    if tableau[m, -1] < -tol * max(1.0, float(np.abs(b).sum())):
        raise InfeasibleProblemError("LP constraints are inconsistent")
    # pivot remaining artificials out of the basis where possible
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= n:
            pivot_col = -1
            for j in range(n):
                if abs(tableau[i, j]) > tol:
                    pivot_col = j
                    break
            if pivot_col < 0:
                keep[i] = False  # redundant row
                continue
            pivot = tableau[i, pivot_col]
            tableau[i, :] /= pivot
            for r in range(m + 1):
                if r != i and tableau[r, pivot_col] != 0.0:
                    tableau[r, :] -= tableau[r, pivot_col] * tableau[i, :]
            basis[i] = pivot_col

    row_idx = np.concatenate([np.where(keep)[0], [m]])
    col_idx = np.concatenate([np.arange(n), [n + m]])
    tableau = tableau[np.ix_(row_idx, col_idx)]
    basis = basis[keep]
    m = len(basis)

    # phase 2: original objective expressed in the current basis
    tableau[m, :] = 0.0
    tableau[m, :q] = c
    for i in range(m):
        if basis[i] < n:
            coef = tableau[m, basis[i]]
            if coef != 0.0:
                tableau[m, :] -= coef * tableau[i, :]
    _simplex_iterate(tableau, basis, tol, max_iter)

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = tableau[i, -1]
    return x[:q]


# ---------------------------------------------------------------------------
# finite-difference gradient checker
# ---------------------------------------------------------------------------


def check_gradient(
    f: Callable[[np.ndarray], float],
    grad_f: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    h: float = 1e-5,
) -> float:
    """Max relative disagreement between ``grad_f`` and central differences.

    Relative error per entry is |analytic - numeric| / max(1, |numeric|);
    the maximum over entries is returned.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    analytic = np.asarray(grad_f(x0), dtype=np.float64)
    if analytic.shape != x0.shape:
        raise ValueError("gradient shape does not match the evaluation point")
    numeric = np.empty_like(x0)
    it = np.nditer(x0, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        bumped = x0.copy()
        bumped[idx] = x0[idx] + h
        f_plus = float(f(bumped))
        bumped[idx] = x0[idx] - h
        f_minus = float(f(bumped))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise ValueError("objective is non-finite at a probe point")
        numeric[idx] = (f_plus - f_minus) / (2.0 * h)
        it.iternext()
    denom = np.maximum(1.0, np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))
