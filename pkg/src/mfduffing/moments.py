"""Linear dynamical susceptibility by the method of moments.

The first-order density correction is written as ``P0 * p1`` with

    p1 = sum_jk c[j, k] H_j(v / sqrt(2D)) phi_k(x)

(physicists' Hermite polynomials in velocity, a polynomial basis ``phi_k``
of degree ``k`` in position).  Projecting the linearized Fokker-Planck
equation onto ``H_s phi_l`` gives one block row per Hermite index ``s``:

    C_s c[s-1] + A_s c[s] + B_s c[s+1] = delta_{s,1} d_1

    A_s = (gamma s - i Omega) <phi_l phi_k>
    B_s = -sqrt(2D) (s+1) <phi_l' phi_k>
    C_s = sqrt(D/2) <phi_l phi_k'>   (C_1 also: -mu <phi_l><x phi_k> / sqrt(2D))
    d_1 = <phi_l> / sqrt(2D)

With ``phi_k = x^k`` these are the Hankel-moment blocks.  Every basis of
the same degree spans the same space, so the truncated solution does not
depend on the choice; only conditioning does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InsufficientMoments, SingularBlock
from .model import SystemParams
from .stationary import (
    MomentTable,
    SweepCurve,
    _guarded,
    _ordered_map,
    _param_at,
    moment_table,
    quadrature_rule,
    solve_equilibria,
)

__all__ = [
    "TruncationOrders",
    "Basis",
    "BlockSystem",
    "Susceptibility",
    "monomial_basis",
    "orthonormal_basis",
    "hankel_scale",
    "build_block_system",
    "build_from_basis",
    "assemble_dense",
    "solve_block_tridiagonal",
    "solve_dense",
    "residual",
    "coefficient_response",
    "normalization_defect",
    "solve_moment_system",
    "susceptibility",
    "spectral_amplification_factor",
    "saf_sweep",
    "truncation_convergence",
]

RCOND_MIN = 1e-14


@dataclass(frozen=True)
class TruncationOrders:
    K: int = 10
    J: int = 10

    def __post_init__(self):
        if self.K < 1 or self.J < 1:
            raise ValueError("truncation orders must be at least 1")

    @property
    def moments_needed(self) -> int:
        return 2 * self.K + 2


@dataclass(frozen=True)
class Basis:
    """Stationary averages of a position basis ``phi_0..phi_K``.

    ``gram[l, k] = <phi_l phi_k>``, ``deriv[l, k] = <phi_l' phi_k>``,
    ``mean[l] = <phi_l>``, ``x_mean[k] = <x phi_k>``.
    """

    gram: np.ndarray
    deriv: np.ndarray
    mean: np.ndarray
    x_mean: np.ndarray
    name: str

    @property
    def K(self):
        return self.gram.shape[0] - 1


def hankel_scale(moments: MomentTable, params: SystemParams) -> float:
    """Length scale ``sqrt(max(<x^2>, a/b))`` for the rescaled monomial basis."""
    return math.sqrt(max(float(moments[2]), params.a / params.b))


def monomial_basis(moments: MomentTable, K: int, scale: float = 1.0) -> Basis:
    """``phi_k = (x / scale)^k``; every average is a stationary moment."""
    if moments.n_max < 2 * K + 1:
        raise InsufficientMoments(
            f"need moments up to order {2 * K + 2}, table has {moments.n_max}"
        )
    n = np.arange(2 * K + 2)
    m = np.asarray(moments.moments[: 2 * K + 2], dtype=float) / scale**n
    l = np.arange(K + 1)[:, None]
    k = np.arange(K + 1)[None, :]
    # m[-1] would wrap around; those entries carry a zero factor l
    lowered = np.where(l + k >= 1, m[np.maximum(l + k - 1, 0)], 0.0)
    return Basis(
        gram=m[l + k],
        deriv=l * lowered / scale,
        mean=m[: K + 1].copy(),
        x_mean=scale * m[1 : K + 2],
        name=f"monomial(scale={scale:g})",
    )


def orthonormal_basis(params: SystemParams, X0: float, K: int, tilt: float = 0.0) -> Basis:
    """Polynomials orthonormal under the stationary position density.

    Built by Gram-Schmidt (two passes) on the stationary quadrature rule,
    with derivatives carried through the same operations.
    """
    xs, w = quadrature_rule(params, X0, 2 * K + 2, tilt)
    n = len(xs)
    p = np.zeros((K + 1, n))
    dp = np.zeros((K + 1, n))
    p[0] = 1.0
    for k in range(K):
        nxt = xs * p[k]
        dnxt = p[k] + xs * dp[k]
        # full Gram-Schmidt (twice) instead of the bare three-term update
        for _ in range(2):
            for j in range(k + 1):
                proj = np.sum(w * nxt * p[j])
                nxt -= proj * p[j]
                dnxt -= proj * dp[j]
        norm = math.sqrt(np.sum(w * nxt**2))
        p[k + 1], dp[k + 1] = nxt / norm, dnxt / norm
    return Basis(
        gram=(p * w) @ p.T,
        deriv=(dp * w) @ p.T,
        mean=p @ w,
        x_mean=p @ (w * xs),
        name="orthonormal",
    )


@dataclass(frozen=True)
class BlockSystem:
    """Blocks of the truncated moment system.

    ``A[s]`` for ``s = 0..J``, ``B[s]`` for ``s = 0..J-1`` (coupling to
    ``c[s+1]``), ``C[s]`` for ``s = 1..J`` (coupling to ``c[s-1]``; ``C[0]``
    is ``None``), and right-hand-side blocks ``rhs``.
    """

    A: list
    B: list
    C: list
    rhs: list
    Omega: float
    basis: Basis

    @property
    def J(self):
        return len(self.A) - 1

    @property
    def block_size(self):
        return self.A[0].shape[0]


def build_from_basis(basis: Basis, params: SystemParams, Omega: float, J: int,
                     coupling: bool = True) -> BlockSystem:
    if Omega == 0:
        raise ValueError("the moment system is degenerate at Omega = 0")
    D, gamma, mu = params.D, params.gamma, params.mu
    A = [(gamma * s - 1j * Omega) * basis.gram for s in range(J + 1)]
    B = [-math.sqrt(2 * D) * (s + 1) * basis.deriv + 0j for s in range(J)]
    C = [None]
    for s in range(1, J + 1):
        block = math.sqrt(D / 2) * basis.deriv.T + 0j
        if s == 1 and coupling:
            block = block - mu / math.sqrt(2 * D) * np.outer(basis.mean, basis.x_mean)
        C.append(block)
    rhs = [np.zeros(basis.K + 1, dtype=complex) for _ in range(J + 1)]
    rhs[1] = basis.mean / math.sqrt(2 * D) + 0j
    return BlockSystem(A, B, C, rhs, float(Omega), basis)


def build_block_system(moments: MomentTable, params: SystemParams, Omega: float,
                       orders: TruncationOrders = TruncationOrders(),
                       scale: float = 1.0, coupling: bool = True) -> BlockSystem:
    """Hankel-moment blocks in the basis ``(x / scale)^k``.

    ``coupling=False`` drops the mean-field term from ``C_1``.
    """
    if moments.n_max < orders.moments_needed:
        raise InsufficientMoments(
            f"need moments up to order {orders.moments_needed}, table has {moments.n_max}"
        )
    return build_from_basis(monomial_basis(moments, orders.K, scale), params, Omega,
                            orders.J, coupling)


def assemble_dense(system: BlockSystem):
    """The full ``(J+1)(K+1)`` matrix and right-hand side."""
    n, J = system.block_size, system.J
    M = np.zeros(((J + 1) * n, (J + 1) * n), dtype=complex)
    for s in range(J + 1):
        rows = slice(s * n, (s + 1) * n)
        M[rows, s * n:(s + 1) * n] = system.A[s]
        if s < J:
            M[rows, (s + 1) * n:(s + 2) * n] = system.B[s]
        if s > 0:
            M[rows, (s - 1) * n:s * n] = system.C[s]
    return M, np.concatenate(system.rhs)


def _lu(block, s):
    lu, piv, info = scipy.linalg.lapack.zgetrf(block)
    if info > 0:
        raise SingularBlock(f"pivot block {s} is exactly singular")
    anorm = np.linalg.norm(block, 1)
    rcond, _ = scipy.linalg.lapack.zgecon(lu, anorm, norm="1")
    if rcond < RCOND_MIN:
        raise SingularBlock(f"pivot block {s} has reciprocal condition {rcond:.2e}")
    return lu, piv


def solve_block_tridiagonal(system: BlockSystem) -> np.ndarray:
    """Block Thomas elimination; returns ``c`` with shape ``(J+1, K+1)``.

    Forward sweep ``S_0 = A_0``, ``S_s = A_s - C_s S_{s-1}^{-1} B_{s-1}``
    with each pivot block LU-factorized (partial pivoting), then back
    substitution.
    """
    J = system.J
    gains, ys = [], []
    for s in range(J + 1):
        S = system.A[s].copy()
        r = system.rhs[s].copy()
        if s > 0:
            S -= system.C[s] @ gains[-1]
            r -= system.C[s] @ ys[-1]
        lu = _lu(S, s)
        if s < J:
            gains.append(scipy.linalg.lu_solve(lu, system.B[s]))
        ys.append(scipy.linalg.lu_solve(lu, r))
    c = np.empty((J + 1, system.block_size), dtype=complex)
    c[J] = ys[J]
    for s in range(J - 1, -1, -1):
        c[s] = ys[s] - gains[s] @ c[s + 1]
    return c


def solve_dense(system: BlockSystem) -> np.ndarray:
    """Monolithic LU solve of the assembled system (oracle for the block path)."""
    M, rhs = assemble_dense(system)
    return np.linalg.solve(M, rhs).reshape(system.J + 1, system.block_size)


def residual(system: BlockSystem, c: np.ndarray) -> float:
    """Max-norm residual relative to the right-hand-side max-norm."""
    M, rhs = assemble_dense(system)
    size = np.abs(rhs).max()
    return float(np.abs(M @ c.ravel() - rhs).max() / (size if size > 0 else 1.0))


def normalization_defect(system: BlockSystem, c: np.ndarray) -> float:
    """``|int P1|`` relative to ``|c|``; the first row keeps it zero."""
    scale = np.abs(c).max()
    return float(abs(np.dot(c[0], system.basis.mean)) / (scale if scale > 0 else 1.0))


def coefficient_response(system: BlockSystem, c: np.ndarray) -> complex:
    """``<x p1>_0 = sum_k c[0, k] <x phi_k>``.

    The unknowns come from ``P1 = P11 + i P12`` with the density correction
    ``eps0 (P11 cos + P12 sin)``, so this value ``z`` gives the response
    ``eps0 Re[z exp(-i Omega t)]``.
    """
    return complex(np.dot(c[0], system.basis.x_mean))


@dataclass(frozen=True)
class Susceptibility:
    Omega: float
    value: complex
    orders: TruncationOrders
    X0: float

    @property
    def saf(self) -> float:
        return abs(self.value) ** 2


def make_basis(params: SystemParams, X0: float, K: int, kind: str = "orthonormal") -> Basis:
    """``orthonormal`` (default), ``hankel`` (monomials in
    ``x / sqrt(max(<x^2>, a/b))``) or ``monomial`` (plain ``x^k``)."""
    if kind == "orthonormal":
        return orthonormal_basis(params, X0, K)
    moments = moment_table(params, X0, 2 * K + 2)
    if kind == "hankel":
        return monomial_basis(moments, K, hankel_scale(moments, params))
    if kind == "monomial":
        return monomial_basis(moments, K)
    raise ValueError(f"unknown basis {kind!r}")


def solve_moment_system(params: SystemParams, X0: float, Omega: float,
                        orders: TruncationOrders = TruncationOrders(),
                        basis: str | Basis = "orthonormal", coupling: bool = True):
    """Build and block-solve; returns ``(system, coefficients)``."""
    if not isinstance(basis, Basis):
        basis = make_basis(params, X0, orders.K, basis)
    system = build_from_basis(basis, params, Omega, orders.J, coupling)
    return system, solve_block_tridiagonal(system)


def _chi(params, X0, Omega, orders, basis="orthonormal", coupling=True):
    system, c = solve_moment_system(params, X0, Omega, orders, basis, coupling)
    return coefficient_response(system, c).conjugate()


def susceptibility(params: SystemParams, X0: float, Omega: float,
                   orders: TruncationOrders = TruncationOrders(),
                   basis: str | Basis = "orthonormal") -> Susceptibility:
    """``chi(Omega)`` at the equilibrium ``X0``.

    Convention: the drive ``eps0 cos(Omega t)`` produces the order-parameter
    response ``eps0 Re[chi(Omega) exp(i Omega t)]``, so a lagging response
    has ``Im chi < 0`` and ``chi(-Omega) = conj(chi(Omega))``.  ``Omega = 0``
    is handled by ``static_susceptibility``.
    """
    value = _chi(params, X0, Omega, orders, basis)
    return Susceptibility(float(Omega), value, orders, float(X0))


def spectral_amplification_factor(params: SystemParams, X0: float, Omega: float,
                                  orders: TruncationOrders = TruncationOrders()) -> float:
    return abs(_chi(params, X0, Omega, orders)) ** 2


def saf_sweep(params: SystemParams, axis: str, values, Omega: float | None = None,
              orders: TruncationOrders = TruncationOrders(), *,
              branch: str = "nonnegative", workers: int = 1) -> SweepCurve:
    """SAF along ``D``, ``mu``, ``gamma`` or ``Omega``.

    The equilibrium is re-solved wherever it depends on the axis and the
    stable branch is picked by ``branch``.  ``Omega`` is the drive frequency
    unless it is the axis.
    """
    if axis not in ("D", "mu", "gamma", "Omega"):
        raise ValueError("SAF sweeps run along D, mu, gamma or Omega")
    if axis != "Omega" and Omega is None:
        raise ValueError("a drive frequency is required")
    values = [float(v) for v in values]
    shared = None
    if axis in ("gamma", "Omega"):
        # the stationary density depends on neither gamma nor Omega
        X0 = solve_equilibria(params).select(branch).X0
        shared = make_basis(params, X0, orders.K)

    def point(value):
        if axis == "Omega":
            chi = _chi(params, None, value, orders, shared)
        elif axis == "gamma":
            chi = _chi(params.with_(gamma=value), None, Omega, orders, shared)
        else:
            p = _param_at(params, axis, value)
            X0 = solve_equilibria(p).select(branch).X0
            chi = _chi(p, X0, Omega, orders)
        return (chi.real, chi.imag, abs(chi) ** 2)

    results = _ordered_map(_guarded(point), values, workers)
    rows = [r for r, _ in results]
    errors = {i: e for i, (_, e) in enumerate(results) if e}
    return SweepCurve(axis, values, rows, "saf", ("re_chi", "im_chi", "saf"), errors)


def truncation_convergence(params: SystemParams, X0: float, Omega: float, order_grid,
                           basis: str = "orthonormal") -> list:
    """Relative change ``|chi_next - chi_prev| / |chi_prev|`` along
    ``order_grid`` (ints meaning ``K = J``, or ``TruncationOrders``)."""
    grid = [o if isinstance(o, TruncationOrders) else TruncationOrders(int(o), int(o))
            for o in order_grid]
    chis = [_chi(params, X0, Omega, o, basis) for o in grid]
    return [abs(b - a) / abs(a) for a, b in zip(chis, chis[1:])]
