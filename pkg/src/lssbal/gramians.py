"""Switched-system Gramians via coupled generalized Lyapunov equations.

The reachability Gramians P_q and observability Gramians Q_q of a
switched system satisfy, for every mode i,

    A_i P_i + P_i A_i' + sum_{j != i} K[j,i] P_j K[j,i]' + B_i B_i' = 0,
    A_i' Q_i + Q_i A_i + sum_{j != i} K[i,j]' Q_j K[i,j] + C_i' C_i = 0.

They are computed here as convergent series of per-mode standard
Lyapunov solutions: the level-1 terms are the uncoupled mode Gramians
and each further level feeds the previous one through the couplings.
A slow tensor-quadrature evaluation of the defining integrals is
provided as an independent cross-check for tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, StabilityError, LssError
from .model import LssModel, as_normalized

DEFAULT_TOL = 1e-10
DEFAULT_MAX_LEVELS = 500


def spectral_abscissa(A: np.ndarray) -> float:
    """Largest real part over the eigenvalues of A."""
    return float(np.max(np.real(np.linalg.eigvals(A))))


def solve_lyapunov(A: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Solve A X + X A' + W = 0 for symmetric X.

    Uses the Schur-based dense solver; A must be stable and W symmetric.
    The result is symmetrized and its relative residual is verified to
    be below 1e-10.
    """
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape != W.shape:
        raise LssError(f"shape mismatch: A {A.shape}, W {W.shape}")
    if not np.allclose(W, W.T, rtol=0.0, atol=1e-10 * max(1.0, np.linalg.norm(W))):
        raise LssError("forcing term W must be symmetric")
    alpha = spectral_abscissa(A)
    if alpha >= 0.0:
        raise StabilityError(
            f"matrix is not stable (spectral abscissa {alpha:.3e} >= 0)"
        )
    try:
        X = scipy.linalg.solve_continuous_lyapunov(A, -W)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise LssError(f"Lyapunov solve broke down: {exc}") from exc
    X = 0.5 * (X + X.T)
    resid = np.linalg.norm(A @ X + X @ A.T + W, "fro")
    if resid > 1e-10 * max(1.0, np.linalg.norm(W, "fro")):
        raise LssError(
            f"Lyapunov residual {resid:.3e} exceeds tolerance; "
            "system may be too ill-conditioned"
        )
    return X


def _require_stable_modes(model: LssModel) -> list[float]:
    abscissas = [spectral_abscissa(mode.A) for mode in model.modes]
    for q, a in enumerate(abscissas, start=1):
        if a >= 0.0:
            raise StabilityError(
                f"mode {q} is not stable (spectral abscissa {a:.3e} >= 0)"
            )
    return abscissas


def _coupling_forcing(model: LssModel, kind: str, prev: list[np.ndarray]) -> list[np.ndarray]:
    """Per-mode coupling terms built from the previous series level."""
    D = model.num_modes
    out = []
    for i in range(1, D + 1):
        n = model.mode(i).n
        W = np.zeros((n, n))
        for j in range(1, D + 1):
            if j == i:
                continue
            if kind == "reach":
                K = model.coupling(j, i)
                W += K @ prev[j - 1] @ K.T
            else:
                K = model.coupling(i, j)
                W += K.T @ prev[j - 1] @ K
        out.append(0.5 * (W + W.T))
    return out


def _level_one(model: LssModel, kind: str) -> list[np.ndarray]:
    out = []
    for mode in model.modes:
        if kind == "reach":
            out.append(solve_lyapunov(mode.A, mode.B @ mode.B.T))
        else:
            out.append(solve_lyapunov(mode.A.T, mode.C.T @ mode.C))
    return out


def _next_level(model: LssModel, kind: str, prev: list[np.ndarray]) -> list[np.ndarray]:
    forcing = _coupling_forcing(model, kind, prev)
    out = []
    for mode, W in zip(model.modes, forcing):
        A = mode.A if kind == "reach" else mode.A.T
        out.append(solve_lyapunov(A, W))
    return out


def _check_kind(kind: str) -> None:
    if kind not in ("reach", "obs"):
        raise LssError(f"kind must be 'reach' or 'obs', got {kind!r}")


def level_k_gramians(model: LssModel, k: int, kind: str = "reach") -> list[np.ndarray]:
    """Level-k Gramians: energy over switching sequences of length k.

    Level 1 is the standard per-mode Gramian; level k > 1 solves the
    recursion that feeds level k-1 through the couplings.
    """
    _check_kind(kind)
    if k < 1:
        raise LssError(f"level must be >= 1, got {k}")
    model = as_normalized(model)
    _require_stable_modes(model)
    level = _level_one(model, kind)
    for _ in range(k - 1):
        level = _next_level(model, kind, level)
    return level


def gramian_by_quadrature(
    model: LssModel,
    mode: int,
    k: int,
    kind: str = "reach",
    t_max: float = 30.0,
    steps: int = 1200,
) -> np.ndarray:
    """Level-k Gramian of one mode by tensor-product trapezoidal quadrature.

    Evaluates the defining iterated integral over [0, t_max]^k, summing
    the contribution of every admissible mode tuple (no two consecutive
    modes equal).  Slow; intended as a test oracle for k <= 3.
    """
    _check_kind(kind)
    if not 1 <= k <= 3:
        raise LssError(f"quadrature oracle supports k in 1..3, got {k}")
    model = as_normalized(model)
    _require_stable_modes(model)
    D = model.num_modes

    h = t_max / steps
    # tabulate e^{A h i} on the grid by repeated multiplication
    exp_tables = []
    for m in model.modes:
        Eh = scipy.linalg.expm(m.A * h)
        tab = np.empty((steps + 1, m.n, m.n))
        tab[0] = np.eye(m.n)
        for i in range(steps):
            tab[i + 1] = Eh @ tab[i]
        exp_tables.append(tab)
    weights = np.full(steps + 1, h)
    weights[0] = weights[-1] = h / 2.0

    def axis_quad(q: int, inner: np.ndarray, transposed: bool) -> np.ndarray:
        tab = exp_tables[q - 1]
        if transposed:
            left = np.matmul(np.transpose(tab, (0, 2, 1)), inner)
            return np.einsum("i,iab,ibc->ac", weights, left, tab)
        left = np.matmul(tab, inner)
        return np.einsum("i,iab,icb->ac", weights, left, tab)

    def tuples_from(start: int, length: int):
        seqs = [[start]]
        for _ in range(length - 1):
            seqs = [s + [c] for s in seqs for c in range(1, D + 1) if c != s[-1]]
        return seqs

    n = model.mode(mode).n
    total = np.zeros((n, n))
    for seq in tuples_from(mode, k):
        if kind == "reach":
            # chain e^{A_{q1} t1} K[q2,q1] ... e^{A_{qk} tk} B_{qk}
            last = seq[-1]
            inner = axis_quad(last, model.mode(last).B @ model.mode(last).B.T, False)
            for qj, qnext in zip(seq[-2::-1], seq[::-1]):
                K = model.coupling(qnext, qj)
                inner = axis_quad(qj, K @ inner @ K.T, False)
        else:
            # chain C_{qk} e^{A_{qk} tk} K[q_{k-1},qk] ... e^{A_{q1} t1};
            # the requested mode carries the first time axis
            last = seq[-1]
            inner = axis_quad(last, model.mode(last).C.T @ model.mode(last).C, True)
            for qj, qnext in zip(seq[-2::-1], seq[::-1]):
                K = model.coupling(qj, qnext)
                inner = axis_quad(qj, K.T @ inner @ K, True)
        total += inner
    return 0.5 * (total + total.T)


@dataclass(frozen=True)
class SolveDiagnostics:
    """Convergence record of one coupled-series solve."""

    levels: int
    residuals: tuple[float, ...]
    increment: float
    converged: bool


@dataclass(frozen=True)
class CoupledSolution:
    """Per-mode Gramians of one kind plus solver diagnostics."""

    kind: str
    matrices: tuple[np.ndarray, ...]
    diagnostics: SolveDiagnostics


@dataclass(frozen=True)
class GramianSet:
    """Reachability and observability Gramians for every mode."""

    reach: tuple[np.ndarray, ...]
    obs: tuple[np.ndarray, ...]
    reach_diagnostics: SolveDiagnostics
    obs_diagnostics: SolveDiagnostics

    @property
    def converged(self) -> bool:
        return self.reach_diagnostics.converged and self.obs_diagnostics.converged


def _coupled_residuals(model: LssModel, kind: str, mats: list[np.ndarray]) -> list[float]:
    forcing = _coupling_forcing(model, kind, mats)
    out = []
    for mode, X, W in zip(model.modes, mats, forcing):
        if kind == "reach":
            R = mode.A @ X + X @ mode.A.T + W + mode.B @ mode.B.T
            scale = max(1.0, np.linalg.norm(mode.B @ mode.B.T, "fro"))
        else:
            R = mode.A.T @ X + X @ mode.A + W + mode.C.T @ mode.C
            scale = max(1.0, np.linalg.norm(mode.C.T @ mode.C, "fro"))
        out.append(float(np.linalg.norm(R, "fro") / scale))
    return out


def solve_coupled(
    model: LssModel,
    kind: str = "reach",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_LEVELS,
) -> CoupledSolution:
    """Solve the coupled Lyapunov system of one kind by series summation.

    Accumulates the level series until the increment drops below
    ``tol * max(1, ||partial sum||_F)`` and the defining equations hold
    with relative residual below ``tol``.  Raises
    :class:`ConvergenceError` (carrying the existence report) when the
    series has not settled after ``max_iter`` levels.
    """
    _check_kind(kind)
    model = as_normalized(model)
    _require_stable_modes(model)

    level = _level_one(model, kind)
    total = [X.copy() for X in level]
    levels_used = 1
    increment = float(np.sqrt(sum(np.linalg.norm(X, "fro") ** 2 for X in level)))
    for _ in range(1, max_iter):
        total_norm = float(np.sqrt(sum(np.linalg.norm(X, "fro") ** 2 for X in total)))
        if increment < tol * max(1.0, total_norm):
            residuals = _coupled_residuals(model, kind, total)
            if max(residuals) < tol:
                mats = []
                for X in total:
                    X = 0.5 * (X + X.T)
                    X.flags.writeable = False
                    mats.append(X)
                diag = SolveDiagnostics(
                    levels=levels_used,
                    residuals=tuple(residuals),
                    increment=increment,
                    converged=True,
                )
                return CoupledSolution(kind=kind, matrices=tuple(mats), diagnostics=diag)
        level = _next_level(model, kind, level)
        for i, X in enumerate(level):
            total[i] = total[i] + X
        levels_used += 1
        increment = float(np.sqrt(sum(np.linalg.norm(X, "fro") ** 2 for X in level)))

    report = check_existence(model)
    raise ConvergenceError(
        f"coupled {kind} series did not converge within {max_iter} levels "
        f"(last increment {increment:.3e}); couplings may be too strong",
        last_increment=increment,
        existence=report,
    )


def compute_gramians(
    model: LssModel,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_LEVELS,
) -> GramianSet:
    """Solve both coupled systems and bundle the results."""
    reach = solve_coupled(model, "reach", tol=tol, max_iter=max_iter)
    obs = solve_coupled(model, "obs", tol=tol, max_iter=max_iter)
    return GramianSet(
        reach=reach.matrices,
        obs=obs.matrices,
        reach_diagnostics=reach.diagnostics,
        obs_diagnostics=obs.diagnostics,
    )


@dataclass(frozen=True)
class BlockForm:
    """Single-equation layout of the coupled Lyapunov system.

    ``a_block``, ``b_block`` and ``c_block`` are block-diagonal stacks of
    the mode matrices; ``coupling_blocks`` holds the cyclically permuted
    coupling matrices.  The equation

        a_block P + P a_block' + sum_k Kk P Kk' + b_block b_block' = 0

    has a block-diagonal solution whose diagonal blocks are the per-mode
    reachability Gramians (transposed pattern for observability).
    """

    a_block: np.ndarray
    b_block: np.ndarray
    c_block: np.ndarray
    coupling_blocks: tuple[np.ndarray, ...]
    offsets: tuple[int, ...]


def assemble_block_form(model: LssModel) -> BlockForm:
    """Stack the model into the equivalent single-equation block form."""
    model = as_normalized(model)
    D = model.num_modes
    dims = model.dims
    offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    N = int(offsets[-1])
    m = model.num_inputs
    p = model.num_outputs

    a_block = np.zeros((N, N))
    b_block = np.zeros((N, D * m))
    c_block = np.zeros((D * p, N))
    for q, mode in enumerate(model.modes):
        sl = slice(offsets[q], offsets[q + 1])
        a_block[sl, sl] = mode.A
        b_block[sl, q * m:(q + 1) * m] = mode.B
        c_block[q * p:(q + 1) * p, sl] = mode.C

    blocks = []
    for shift in range(1, D):
        Kd = np.zeros((N, N))
        for i in range(1, D + 1):
            j = ((i - 1 + shift) % D) + 1
            rows = slice(offsets[i - 1], offsets[i])
            cols = slice(offsets[j - 1], offsets[j])
            Kd[rows, cols] = model.coupling(j, i)
        blocks.append(Kd)
    return BlockForm(
        a_block=a_block,
        b_block=b_block,
        c_block=c_block,
        coupling_blocks=tuple(blocks),
        offsets=tuple(int(o) for o in offsets),
    )


@dataclass(frozen=True)
class ExistenceReport:
    """Heuristic convergence diagnosis for the Gramian series.

    ``contraction`` estimates the geometric decay ratio of the level
    increments over a few trial levels; the verdict passes only when all
    modes are stable and the observed ratios stay below one.
    """

    abscissas: tuple[float, ...]
    coupling_norm_max: float
    contraction: float
    passed: bool


def check_existence(model: LssModel, trial_levels: int = 5) -> ExistenceReport:
    """Diagnose whether the coupled Gramian series can converge."""
    model = as_normalized(model)
    abscissas = tuple(spectral_abscissa(mode.A) for mode in model.modes)
    D = model.num_modes
    knorm = 0.0
    for i in range(1, D + 1):
        for j in range(1, D + 1):
            if i != j:
                K = model.coupling(i, j)
                if K.size:
                    knorm = max(knorm, float(np.linalg.norm(K, 2)))

    stable = all(a < 0.0 for a in abscissas)
    contraction = np.inf
    if stable:
        norms = []
        level = _level_one(model, "reach")
        norms.append(float(np.sqrt(sum(np.linalg.norm(X, "fro") ** 2 for X in level))))
        for _ in range(trial_levels - 1):
            level = _next_level(model, "reach", level)
            norms.append(float(np.sqrt(sum(np.linalg.norm(X, "fro") ** 2 for X in level))))
        ratios = [
            b / a for a, b in zip(norms, norms[1:]) if a > 0.0
        ]
        contraction = max(ratios) if ratios else 0.0
    passed = stable and contraction < 1.0
    return ExistenceReport(
        abscissas=abscissas,
        coupling_norm_max=knorm,
        contraction=float(contraction),
        passed=passed,
    )
