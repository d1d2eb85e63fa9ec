"""Bell-diagonal bipartite matrix-product operators.

A translationally invariant Bell-diagonal MPO over a chain of qubit pairs is
described by four coefficient channels A, B, C, D (one per Bell index
phi+, phi-, psi+, psi-), each a completely positive map on the d x d memory
operator space.  Chain quantities use periodic boundary conditions: the
probability of the Bell string x is Tr[M^{x_1} ... M^{x_L}] / Tr[E^L] with
E = A + B + C + D the transfer channel.

Gauge freedom (all coefficients conjugated by the same invertible channel,
optionally rescaled) leaves every chain probability unchanged; the canonical
gauge makes a chosen anchor channel trace-preserving via the Perron
eigenvector of its dual.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .channels import (
    ChannelMatrix,
    ergodicity,
    norm_1to1_positive,
    operator_norm,
    perron_left,
    vec,
)
from .exceptions import (
    ConstructionError,
    DegenerateStateError,
    DimensionMismatchError,
    NumericalInconsistencyError,
)

BELL_LABELS = ("phi+", "phi-", "psi+", "psi-")


class GaugeTag(enum.Enum):
    RAW = "raw"
    A_TP = "a_tp"
    E_TP = "e_tp"


@dataclass(frozen=True)
class BellMPO:
    """Bell-diagonal MPO: coefficient channels for phi+, phi-, psi+, psi-.

    All four channels must be completely positive (local purifiability);
    construction verifies this unless ``validate=False`` is passed, which is
    reserved for gauge-transformed views used in invariance tests.
    """

    d: int
    A: ChannelMatrix
    B: ChannelMatrix
    C: ChannelMatrix
    D: ChannelMatrix
    gauge_tag: GaugeTag = GaugeTag.RAW
    validate: bool = True

    def __post_init__(self):
        for name, ch in zip("ABCD", self.coeffs):
            if ch.dim != self.d:
                raise DimensionMismatchError(f"coefficient {name} has dim {ch.dim}, expected {self.d}")
            if self.validate and not ch.is_cp():
                raise ConstructionError(f"coefficient {name} is not completely positive")

    @property
    def coeffs(self):
        return (self.A, self.B, self.C, self.D)

    @property
    def stack(self) -> np.ndarray:
        """Coefficient transition matrices stacked as shape (4, d^2, d^2)."""
        return np.stack([c.mat for c in self.coeffs])

    @classmethod
    def from_stack(cls, mats: np.ndarray, gauge_tag=GaugeTag.RAW, validate=True) -> "BellMPO":
        n = mats.shape[1]
        d = int(round(np.sqrt(n)))
        chans = [ChannelMatrix(d, m) for m in mats]
        return cls(d, *chans, gauge_tag=gauge_tag, validate=validate)

    @classmethod
    def from_scalars(cls, a: float, b: float, c: float, dd: float, gauge_tag=GaugeTag.RAW) -> "BellMPO":
        """Bond-channel dimension 1 (i.i.d.) MPO from four nonnegative weights."""
        mats = np.array([[[a]], [[b]], [[c]], [[dd]]], dtype=complex)
        return cls.from_stack(mats, gauge_tag=gauge_tag)

    @classmethod
    def werner(cls, fidelity: float) -> "BellMPO":
        """i.i.d. Werner state: weight F on phi+, (1-F)/3 on each other index."""
        r = (1.0 - fidelity) / 3.0
        return cls.from_scalars(fidelity, r, r, r, gauge_tag=GaugeTag.E_TP)

    def scalars(self) -> tuple:
        if self.d != 1:
            raise DimensionMismatchError("scalars() requires bond-channel dimension 1")
        return tuple(float(c.mat[0, 0].real) for c in self.coeffs)

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        def enc(ch: ChannelMatrix):
            flat = ch.mat.reshape(-1)
            return [[float(z.real), float(z.imag)] for z in flat]

        return {
            "schema_version": 1,
            "d": self.d,
            "A": enc(self.A),
            "B": enc(self.B),
            "C": enc(self.C),
            "D": enc(self.D),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "BellMPO":
        d = int(doc["d"])
        n = d * d

        def dec(entries):
            arr = np.array([complex(re, im) for re, im in entries])
            return ChannelMatrix(d, arr.reshape(n, n))

        return cls(d, dec(doc["A"]), dec(doc["B"]), dec(doc["C"]), dec(doc["D"]))

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "BellMPO":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class GaugeResult:
    """Data of a canonical gauge fixing.

    lam: Perron eigenvalue used for rescaling; xi: left Perron operator of the
    anchor's dual (Tr xi = d); S: the gauge channel rho -> xi^1/2 rho xi^1/2;
    kappa: condition number ||xi|| * ||xi^-1||; delta: ||1 - xi||_inf.
    """

    lam: float
    xi: np.ndarray
    S: ChannelMatrix
    kappa: float
    delta: float


# ---------------------------------------------------------------------------
# contraction
# ---------------------------------------------------------------------------

def transfer(mpo: BellMPO) -> ChannelMatrix:
    """Transfer channel E = A + B + C + D."""
    return ChannelMatrix(mpo.d, mpo.stack.sum(axis=0))


def contract_trace(e: ChannelMatrix, length: int) -> float:
    """Tr[E^L] for the transfer channel of a chain with periodic boundaries."""
    if length < 1:
        raise ValueError("chain length must be >= 1")
    t = np.trace(np.linalg.matrix_power(e.mat, length))
    if abs(t.imag) > 1e-8 * max(1.0, abs(t.real)):
        raise NumericalInconsistencyError(f"complex trace residue {t.imag:.3e}")
    return float(t.real)


def string_weight(mpo: BellMPO, string) -> float:
    """Unnormalised Tr[M^{x_1} ... M^{x_L}] for one Bell-index string."""
    mats = mpo.stack
    prod = mats[string[0]]
    for x in string[1:]:
        prod = prod @ mats[x]
    t = np.trace(prod)
    if abs(t.imag) > 1e-8 * max(1.0, abs(t.real)):
        raise NumericalInconsistencyError(f"complex weight residue {t.imag:.3e}")
    return float(t.real)


def string_probability(mpo: BellMPO, string) -> float:
    """Probability of a Bell-index string under periodic boundary conditions."""
    norm = contract_trace(transfer(mpo), len(string))
    if norm <= 1e-14:
        raise DegenerateStateError(f"vanishing normaliser Tr[E^L] = {norm:.3e}")
    p = string_weight(mpo, string) / norm
    if p < -1e-10:
        raise NumericalInconsistencyError(f"negative probability {p:.3e}")
    return p


def all_string_weights(mpo: BellMPO, length: int) -> np.ndarray:
    """Tr[M^{x_1} ... M^{x_L}] for every string, as an array of shape (4,)*L.

    Enumerates all 4^L strings by combining explicit prefix and suffix
    products, so memory stays at O(4^(L/2) d^4).
    """
    mats = mpo.stack

    def prods(k: int) -> np.ndarray:
        p = mats
        for _ in range(k - 1):
            p = np.einsum("...ij,yjk->...yik", p, mats)
        return p.reshape((4,) * k + mats.shape[1:])

    if length == 1:
        w = np.trace(mats, axis1=1, axis2=2)
    else:
        l1 = length // 2
        p1 = prods(l1).reshape((4**l1,) + mats.shape[1:])
        p2 = prods(length - l1).reshape((4 ** (length - l1),) + mats.shape[1:])
        w = np.einsum("aij,bji->ab", p1, p2).reshape((4,) * length)
    if np.abs(w.imag).max() > 1e-8 * max(1.0, np.abs(w.real).max()):
        raise NumericalInconsistencyError("complex string-weight residue")
    return w.real


def local_infidelity(mpo: BellMPO, length: int):
    """Single-pair Bell-error probabilities (p_B, p_C, p_D) on a length-L chain.

    p_X = Tr[X E^(L-1)] / Tr[E^L] for X among the three noise coefficients.
    """
    e = transfer(mpo)
    norm = contract_trace(e, length)
    if norm <= 1e-14:
        raise DegenerateStateError(f"vanishing normaliser Tr[E^L] = {norm:.3e}")
    epow = np.linalg.matrix_power(e.mat, length - 1) if length > 1 else np.eye(e.mat.shape[0])
    out = []
    for ch in (mpo.B, mpo.C, mpo.D):
        t = np.trace(ch.mat @ epow) / norm
        if abs(t.imag) > 1e-8:
            raise NumericalInconsistencyError(f"complex infidelity residue {t.imag:.3e}")
        out.append(float(t.real))
    return tuple(out)


def fidelity(mpo: BellMPO, length: int) -> float:
    """Single-pair fidelity 1 - (p_B + p_C + p_D) at chain length L."""
    return 1.0 - sum(local_infidelity(mpo, length))


def fidelity_infinite(mpo: BellMPO) -> float:
    """Single-pair fidelity in the infinite-chain (Perron-dominant) limit."""
    e = transfer(mpo)
    w, v = np.linalg.eig(e.mat)
    i = int(np.argmax(np.abs(w)))
    wl, vl = np.linalg.eig(e.mat.conj().T)
    j = int(np.argmin(np.abs(wl.conj() - w[i])))
    r = v[:, i]
    l = vl[:, j]
    denom = (l.conj() @ r) * w[i]
    p_err = 0.0
    for ch in (mpo.B, mpo.C, mpo.D):
        val = (l.conj() @ (ch.mat @ r)) / denom
        p_err += val.real
    return float(1.0 - p_err)


# ---------------------------------------------------------------------------
# gauge fixing and noise measures
# ---------------------------------------------------------------------------

def _sqrt_posdef(xi: np.ndarray, floor: float = 1e-12):
    w, u = np.linalg.eigh(xi)
    if w.min() <= floor:
        from .exceptions import SingularPerronError

        raise SingularPerronError(f"eigenvalue {w.min():.3e} at or below floor")
    rt = (u * np.sqrt(w)) @ u.conj().T
    rti = (u * (1.0 / np.sqrt(w))) @ u.conj().T
    return rt, rti


def canonical_gauge(mpo: BellMPO, anchor: str = "A"):
    """Re-gauge and re-scale so that the anchor channel is trace-preserving.

    anchor "A" uses the dominant coefficient, anchor "E" the transfer channel.
    Every coefficient maps X -> lam^-1 S X S^-1 with S the conjugation by
    xi^1/2, xi the left Perron operator of the anchor's dual.  Returns the
    gauged MPO and the GaugeResult record.
    """
    if anchor not in ("A", "E"):
        raise ValueError("anchor must be 'A' or 'E'")
    target = mpo.A if anchor == "A" else transfer(mpo)
    lam, xi = perron_left(target)
    rt, rti = _sqrt_posdef(xi)
    s = ChannelMatrix.conjugation(rt)
    s_inv = ChannelMatrix.conjugation(rti)
    mats = np.stack([(s.mat @ c.mat @ s_inv.mat) / lam for c in mpo.coeffs])
    tag = GaugeTag.A_TP if anchor == "A" else GaugeTag.E_TP
    gauged = BellMPO.from_stack(mats, gauge_tag=tag, validate=mpo.validate)
    kappa = operator_norm(xi) * operator_norm(np.linalg.inv(xi))
    delta = operator_norm(np.eye(mpo.d) - xi)
    return gauged, GaugeResult(lam=lam, xi=xi, S=s, kappa=kappa, delta=delta)


def apply_gauge(mpo: BellMPO, a: np.ndarray, scale: float = 1.0) -> BellMPO:
    """Gauge view X -> scale * S X S^-1 with S the conjugation by matrix a.

    Conjugation channels keep coefficients completely positive, so the result
    validates; chain probabilities are unchanged for any invertible a.
    """
    s = ChannelMatrix.conjugation(np.asarray(a, dtype=complex))
    s_inv = ChannelMatrix.conjugation(np.linalg.inv(a))
    mats = np.stack([scale * (s.mat @ c.mat @ s_inv.mat) for c in mpo.coeffs])
    return BellMPO.from_stack(mats, gauge_tag=GaugeTag.RAW, validate=mpo.validate)


def epsilon(mpo: BellMPO) -> float:
    """Noise level: max of the induced 1->1 norms of the B, C, D channels.

    The value is gauge dependent; evaluate in the gauge appropriate to the
    protocol (anchor A for the post-selected recurrence, anchor E for the
    deterministic code-based protocol).
    """
    return max(norm_1to1_positive(ch) for ch in (mpo.B, mpo.C, mpo.D))


def tau_A(mpo: BellMPO, seed: int = 0) -> float:
    """Ergodicity coefficient of the dominant coefficient channel."""
    return ergodicity(mpo.A, seed=seed)


def tau_E(mpo: BellMPO, seed: int = 0) -> float:
    """Ergodicity coefficient of the transfer channel."""
    return ergodicity(transfer(mpo), seed=seed)
