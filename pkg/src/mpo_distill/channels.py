"""Dense calculus of completely positive maps on small operator spaces.

A linear map ``F`` acting on ``d x d`` complex operators is stored through its
transition matrix ``T`` of shape ``(d*d, d*d)`` in the **column-stacking**
vectorization convention,

    vec(F(sigma)) = T @ vec(sigma),      vec(A) = A.T.reshape(-1).

Every other representation used here (Choi matrix, dual map) is derived from
this single convention.  Composition of maps is the matrix product of their
transition matrices.

The module provides the two induced norms used throughout the package:

* ``norm_1to1_positive`` -- for positive maps the induced trace-norm equals
  the operator norm of the dual map applied to the identity.
* ``norm_1to1_general`` -- for arbitrary maps (differences of channels, the
  fundamental channel, ...) the norm is estimated by multi-start ascent over
  rank-one extreme points of the unit trace-norm ball.  The result is a
  certified lower bound; on completely positive input it matches the closed
  formula to high accuracy.

as well as the ergodicity coefficient (the same induced norm restricted to
Hermitian traceless inputs), Perron eigenpairs of the dual map, and the
fundamental channel ``(id - F + F_inf)^-1`` familiar from Markov-chain
perturbation theory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DegenerateSpectrumError,
    DimensionMismatchError,
    NumericalInconsistencyError,
    SingularFundamentalError,
    SingularPerronError,
)

DEFAULT_SEED = 0
TOL_PSD = 1e-10
TOL_TP = 1e-9
TOL_DEGENERATE = 1e-9


# ---------------------------------------------------------------------------
# vectorization helpers (column stacking)
# ---------------------------------------------------------------------------

def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(matrix).T.reshape(-1)


def unvec(vector: np.ndarray, d: int) -> np.ndarray:
    """Inverse of :func:`vec` for a d x d matrix."""
    return np.asarray(vector).reshape(d, d).T


def _vec_batch(mats: np.ndarray) -> np.ndarray:
    # (B, d, d) -> (B, d*d)
    b, d, _ = mats.shape
    return mats.transpose(0, 2, 1).reshape(b, d * d)


def _unvec_batch(vecs: np.ndarray, d: int) -> np.ndarray:
    # (B, d*d) -> (B, d, d)
    return vecs.reshape(-1, d, d).transpose(0, 2, 1)


# ---------------------------------------------------------------------------
# ChannelMatrix
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelMatrix:
    """A linear map on d x d operators, stored as its transition matrix.

    Values are immutable after construction and safe to share across threads.
    """

    dim: int
    mat: np.ndarray

    def __post_init__(self):
        mat = np.array(self.mat, dtype=complex)
        n = self.dim * self.dim
        if mat.shape != (n, n):
            raise DimensionMismatchError(
                f"transition matrix for dim {self.dim} must be {n}x{n}, got {mat.shape}"
            )
        if not np.all(np.isfinite(mat.view(float))):
            raise ValueError("transition matrix contains non-finite entries")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_kraus(cls, kraus_ops) -> "ChannelMatrix":
        """Channel sigma -> sum_a K_a sigma K_a^dag from a Kraus set."""
        kraus_ops = [np.asarray(k, dtype=complex) for k in kraus_ops]
        d = kraus_ops[0].shape[0]
        t = sum(np.kron(k.conj(), k) for k in kraus_ops)
        return cls(d, t)

    @classmethod
    def identity(cls, d: int) -> "ChannelMatrix":
        return cls(d, np.eye(d * d, dtype=complex))

    @classmethod
    def zero(cls, d: int) -> "ChannelMatrix":
        return cls(d, np.zeros((d * d, d * d), dtype=complex))

    @classmethod
    def depolarizing(cls, d: int) -> "ChannelMatrix":
        """sigma -> Tr(sigma) * identity / d."""
        t = np.outer(vec(np.eye(d) / d), vec(np.eye(d)))
        return cls(d, t)

    @classmethod
    def replacer(cls, rho0: np.ndarray) -> "ChannelMatrix":
        """sigma -> Tr(sigma) * rho0."""
        rho0 = np.asarray(rho0, dtype=complex)
        d = rho0.shape[0]
        return cls(d, np.outer(vec(rho0), vec(np.eye(d))))

    @classmethod
    def conjugation(cls, a: np.ndarray) -> "ChannelMatrix":
        """sigma -> a sigma a^dag for a fixed matrix a."""
        a = np.asarray(a, dtype=complex)
        return cls(a.shape[0], np.kron(a.conj(), a))

    # -- arithmetic ---------------------------------------------------------

    def _require_same_dim(self, other: "ChannelMatrix"):
        if self.dim != other.dim:
            raise DimensionMismatchError(f"dims differ: {self.dim} vs {other.dim}")

    def __add__(self, other: "ChannelMatrix") -> "ChannelMatrix":
        self._require_same_dim(other)
        return ChannelMatrix(self.dim, self.mat + other.mat)

    def __sub__(self, other: "ChannelMatrix") -> "ChannelMatrix":
        self._require_same_dim(other)
        return ChannelMatrix(self.dim, self.mat - other.mat)

    def __mul__(self, c) -> "ChannelMatrix":
        return ChannelMatrix(self.dim, self.mat * complex(c))

    __rmul__ = __mul__

    def __matmul__(self, other: "ChannelMatrix") -> "ChannelMatrix":
        """Composition: (F @ G)(sigma) = F(G(sigma))."""
        self._require_same_dim(other)
        return ChannelMatrix(self.dim, self.mat @ other.mat)

    def power(self, k: int) -> "ChannelMatrix":
        return ChannelMatrix(self.dim, np.linalg.matrix_power(self.mat, k))

    # -- basic queries -------------------------------------------------------

    def apply(self, sigma: np.ndarray) -> np.ndarray:
        """Apply the map to an operator, returning F(sigma)."""
        sigma = np.asarray(sigma, dtype=complex)
        if sigma.shape != (self.dim, self.dim):
            raise DimensionMismatchError(
                f"operator must be {self.dim}x{self.dim}, got {sigma.shape}"
            )
        return unvec(self.mat @ vec(sigma), self.dim)

    def dual(self) -> "ChannelMatrix":
        """The dual map F+ with Tr(A F(B)) = Tr(F+(A) B) for all A, B.

        For completely positive maps this coincides with the Heisenberg
        (Kraus-adjoint) picture.  In the column-stacking convention the
        transition matrix of the dual is the full index reversal of T.
        """
        d = self.dim
        t4 = self.mat.reshape(d, d, d, d)
        return ChannelMatrix(d, np.ascontiguousarray(t4.transpose(3, 2, 1, 0)).reshape(d * d, d * d))

    def choi(self) -> np.ndarray:
        """Choi matrix (reshuffle of the transition matrix)."""
        d = self.dim
        t4 = self.mat.reshape(d, d, d, d)
        return np.ascontiguousarray(t4.transpose(3, 1, 2, 0)).reshape(d * d, d * d)

    def is_cp(self, tol: float = TOL_PSD) -> bool:
        """Complete positivity: the Choi matrix is Hermitian PSD within tol."""
        c = self.choi()
        if np.abs(c - c.conj().T).max() > 1e3 * tol:
            return False
        w = np.linalg.eigvalsh((c + c.conj().T) / 2)
        return bool(w.min() >= -tol)

    def is_tp(self, tol: float = TOL_TP) -> bool:
        """Trace preservation: dual()(1) = 1 within tol."""
        d = self.dim
        return bool(np.abs(self.dual().apply(np.eye(d)) - np.eye(d)).max() <= tol)


def apply(channel: ChannelMatrix, sigma: np.ndarray) -> np.ndarray:
    """Functional form of :meth:`ChannelMatrix.apply`."""
    return channel.apply(sigma)


def dual(channel: ChannelMatrix) -> ChannelMatrix:
    """Functional form of :meth:`ChannelMatrix.dual`."""
    return channel.dual()


def operator_norm(m: np.ndarray) -> float:
    """Spectral norm (largest singular value)."""
    return float(np.linalg.norm(np.asarray(m), 2))


def trace_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(m), "nuc"))


# ---------------------------------------------------------------------------
# induced 1->1 norms and ergodicity coefficient
# ---------------------------------------------------------------------------

def norm_1to1_positive(channel: ChannelMatrix) -> float:
    """Induced trace-norm of a *positive* map: || F+(1) ||_inf.

    The caller asserts positivity (complete positivity suffices); for general
    maps use :func:`norm_1to1_general`.
    """
    return operator_norm(channel.dual().apply(np.eye(channel.dim)))


@dataclass
class AscentResult:
    """Outcome of a multi-start ascent: a certified lower bound on the norm."""

    value: float
    x: np.ndarray
    y: np.ndarray
    converged: bool
    iterations: int


def _ascend_trace_norm(
    channel: ChannelMatrix,
    hermitian: bool,
    seed: int,
    restarts: int,
    max_iter: int,
    step_tol: float = 1e-10,
    warm_starts=None,
) -> AscentResult:
    """Maximize ||F(sigma)||_1 over extreme points of the unit trace-norm ball.

    hermitian=False: sigma = |x><y| over unit vectors (induced 1->1 norm).
    hermitian=True:  sigma = (|x><x| - |y><y|)/2 (ergodicity coefficient;
    requires a Hermiticity-preserving map).

    Each sweep alternates an exact maximization of the linearized objective
    (the subgradient step for the trace norm followed by the optimal rank-one
    update), which never decreases the objective; restarts are deterministic
    for a given seed.
    """
    d = channel.dim
    n = d * d
    t = channel.mat
    tc = t.conj()

    rng = np.random.default_rng(seed)
    x = rng.standard_normal((restarts, d)) + 1j * rng.standard_normal((restarts, d))
    y = rng.standard_normal((restarts, d)) + 1j * rng.standard_normal((restarts, d))
    if warm_starts:
        ws_x = np.array([w[0] for w in warm_starts])
        ws_y = np.array([w[1] for w in warm_starts])
        x = np.concatenate([x, ws_x])
        y = np.concatenate([y, ws_y])
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    y /= np.linalg.norm(y, axis=1, keepdims=True)

    b = x.shape[0]
    values = np.zeros(b)
    done = np.zeros(b, dtype=bool)
    plateau = 0
    it = 0
    for it in range(1, max_iter + 1):
        if hermitian:
            sigma = 0.5 * (
                x[:, :, None] * x[:, None, :].conj()
                - y[:, :, None] * y[:, None, :].conj()
            )
        else:
            sigma = x[:, :, None] * y[:, None, :].conj()
        m = _unvec_batch(_vec_batch(sigma) @ t.T, d)
        if hermitian:
            m = 0.5 * (m + m.conj().transpose(0, 2, 1))
            w, u = np.linalg.eigh(m)
            new_values = np.abs(w).sum(axis=1)
            sign = np.where(w >= 0, 1.0, -1.0)
            wop = (u * sign[:, None, :]) @ u.conj().transpose(0, 2, 1)
        else:
            u, s, vh = np.linalg.svd(m)
            new_values = s.sum(axis=1)
            wop = u @ vh
        improvement = float(np.max(new_values - values)) if it > 1 else np.inf
        values = np.maximum(values, new_values)

        # lift the subgradient back and take the optimal rank-one update
        g = _unvec_batch(_vec_batch(wop) @ tc, d)
        if hermitian:
            g = 0.5 * (g + g.conj().transpose(0, 2, 1))
            gw, gu = np.linalg.eigh(g)
            xn = gu[:, :, -1]
            yn = gu[:, :, 0]
        else:
            gu, gs, gvh = np.linalg.svd(g)
            xn = gu[:, :, 0]
            yn = gvh[:, 0, :].conj()

        # phase-align before measuring the step
        for vold, vnew in ((x, xn), (y, yn)):
            ov = np.sum(vold.conj() * vnew, axis=1)
            phase = np.where(np.abs(ov) > 1e-14, ov / np.maximum(np.abs(ov), 1e-300), 1.0)
            vnew *= phase.conj()[:, None]
        step = np.maximum(
            np.linalg.norm(xn - x, axis=1), np.linalg.norm(yn - y, axis=1)
        )
        done |= step < step_tol
        x, y = xn, yn
        if done.all():
            break
        plateau = plateau + 1 if improvement < 1e-13 else 0
        if plateau >= 5:
            done[:] = True
            break

    k = int(np.argmax(values))
    return AscentResult(float(values[k]), x[k], y[k], bool(done[k]), it)


def norm_1to1_general(
    channel: ChannelMatrix,
    seed: int = DEFAULT_SEED,
    restarts: int = 32,
    max_iter: int = 500,
    warm_starts=None,
) -> float:
    """Induced 1->1 norm of an arbitrary map (certified lower bound).

    Computed by multi-start ascent over rank-one sigma = |x><y|; the extreme
    points of the unit trace-norm ball are rank one, so the maximum of the
    convex objective is attained there.  Agrees with
    :func:`norm_1to1_positive` on completely positive maps.
    """
    if channel.dim == 1:
        return float(abs(channel.mat[0, 0]))
    res = _ascend_trace_norm(
        channel, hermitian=False, seed=seed, restarts=restarts,
        max_iter=max_iter, warm_starts=warm_starts,
    )
    return res.value


def ergodicity(
    channel: ChannelMatrix,
    seed: int = DEFAULT_SEED,
    restarts: int = 32,
    max_iter: int = 500,
    warm_starts=None,
) -> float:
    """Ergodicity coefficient: max of ||F(sigma)||_1 over Hermitian traceless
    sigma of unit trace norm.

    Measures how fast the map mixes towards its steady state (0 for a
    replacer channel, 1 for the identity).  The map must preserve
    Hermiticity.  For dim 1 there are no traceless directions and the
    coefficient is defined as 0.
    """
    if channel.dim == 1:
        return 0.0
    res = _ascend_trace_norm(
        channel, hermitian=True, seed=seed, restarts=restarts,
        max_iter=max_iter, warm_starts=warm_starts,
    )
    return res.value


# ---------------------------------------------------------------------------
# Perron eigenpair and fundamental channel
# ---------------------------------------------------------------------------

def perron_left(channel: ChannelMatrix):
    """Leading eigenpair (lam, xi) of the dual map: F+(xi) = lam * xi.

    lam is the spectral radius.  xi is Hermitized and scaled to Tr(xi) = dim,
    so a trace-preserving channel yields xi = identity.  Raises
    DegenerateSpectrumError when the leading eigenvalue is not separated by
    more than 1e-9, and SingularPerronError when xi is not positive definite.
    """
    d = channel.dim
    w, v = np.linalg.eig(channel.dual().mat)
    order = np.argsort(-np.abs(w))
    w, v = w[order], v[:, order]
    lam_c = w[0]
    if len(w) > 1 and np.abs(np.abs(w[0]) - np.abs(w[1])) <= TOL_DEGENERATE:
        raise DegenerateSpectrumError(
            f"leading eigenvalue degenerate: |w0|={abs(w[0]):.3e}, |w1|={abs(w[1]):.3e}"
        )
    if abs(lam_c.imag) > TOL_DEGENERATE * max(1.0, abs(lam_c)):
        raise DegenerateSpectrumError(f"leading eigenvalue not real: {lam_c}")
    lam = float(lam_c.real)
    xi = unvec(v[:, 0], d)
    tr = np.trace(xi)
    if abs(tr) < 1e-12:
        raise SingularPerronError("Perron eigenvector has vanishing trace")
    xi = xi * (d / tr)
    xi = 0.5 * (xi + xi.conj().T)
    residual = np.abs(channel.dual().apply(xi) - lam * xi).max()
    if residual > 1e-9 * max(1.0, abs(lam)):
        raise NumericalInconsistencyError(f"Perron residual {residual:.3e} too large")
    if np.linalg.eigvalsh(xi).min() <= 1e-12:
        raise SingularPerronError("Perron eigenvector not positive definite")
    return lam, xi


def steady_state(channel: ChannelMatrix) -> np.ndarray:
    """Fixed state rho of a trace-preserving channel, normalised Tr(rho)=1."""
    d = channel.dim
    w, v = np.linalg.eig(channel.mat)
    i = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[i] - 1.0) > 1e-8:
        raise NumericalInconsistencyError(
            f"no eigenvalue near 1 (closest {w[i]}); channel not trace-preserving?"
        )
    rho = unvec(v[:, i], d)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise SingularPerronError("steady state has vanishing trace")
    return rho / tr


def fundamental_channel(channel: ChannelMatrix) -> ChannelMatrix:
    """Fundamental channel Z = (id - F + F_inf)^-1 of a trace-preserving F.

    F_inf is the spectral projection onto the eigenvalue-1 eigenspace, i.e.
    sigma -> Tr(sigma) * rho with rho the steady state.  Raises
    SingularFundamentalError when the resolvent is numerically singular.
    """
    d = channel.dim
    if not channel.is_tp():
        raise ValueError("fundamental channel requires a trace-preserving map")
    rho = steady_state(channel)
    t_inf = np.outer(vec(rho), vec(np.eye(d)))
    m = np.eye(d * d) - channel.mat + t_inf
    if np.linalg.cond(m) > 1e12:
        raise SingularFundamentalError("(id - F + F_inf) numerically singular")
    return ChannelMatrix(d, np.linalg.inv(m))


def projection_channel(channel: ChannelMatrix) -> ChannelMatrix:
    """F_inf for a trace-preserving channel: sigma -> Tr(sigma) rho."""
    rho = steady_state(channel)
    return ChannelMatrix.replacer(rho)
