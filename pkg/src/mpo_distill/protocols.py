"""Distillation maps acting on Bell-diagonal MPOs.

Two renormalisation steps are implemented:

* the post-selected 2->1 recurrence step (bilateral CNOT, parity
  post-selection, bilateral Hadamard), as polynomial update rules on the four
  coefficient channels, in both the Bell and the computational basis;
* the deterministic 5->1 step built on syndrome decoding of the five-qubit
  distance-3 stabilizer code, as ordered five-fold coefficient products
  summed over the 4^5 Bell-index patterns of each output class.

``distill_flow`` iterates either step with the appropriate gauge bookkeeping
and records the noise level, ergodicity, condition number, fidelities, and
success probability per round.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelMatrix
from .exceptions import ConstructionError, DegenerateStateError, GaugeFailureError
from .mpo import (
    BELL_LABELS,
    BellMPO,
    GaugeTag,
    canonical_gauge,
    contract_trace,
    epsilon,
    fidelity,
    fidelity_infinite,
    tau_A,
    tau_E,
    transfer,
)

# Bell index <-> Pauli on one side of the pair: phi+ <-> I, phi- <-> Z,
# psi+ <-> X, psi- <-> Y, encoded as symplectic bit pairs (x, z).
BELL_TO_XZ = ((0, 0), (0, 1), (1, 0), (1, 1))

# Five-qubit code: stabilizer generators and the logical frame.  The logical
# pair is taken as (X XXXX..., Y YYYY...): a valid anticommuting pair in the
# code's normalizer.  This frame fixes the labelling of the phi-/psi- output
# classes; it is the one under which the weight-2 leading terms of the update
# rules take their standard form (see tests).
STABILIZER_GENERATORS = ("XZZXI", "IXZZX", "XIXZZ", "ZXIXZ")
LOGICAL_X = "XXXXX"
LOGICAL_Z = "YYYYY"

_PAULI_XZ = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_XZ_PAULI = {v: k for k, v in _PAULI_XZ.items()}


class Protocol(enum.Enum):
    RECURRENCE = "recurrence"
    FIVE_QUBIT = "five-qubit"


# ---------------------------------------------------------------------------
# recurrence protocol
# ---------------------------------------------------------------------------

def _acomm(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y + y @ x


def recurrence_single_step(mpo: BellMPO) -> BellMPO:
    """One 2->1 recurrence step (unnormalised, ungauged).

    A -> A^2 + B^2,  B -> C^2 + D^2,  C -> {A, B},  D -> {C, D}.
    """
    a, b, c, d = (ch.mat for ch in mpo.coeffs)
    mats = np.stack([a @ a + b @ b, c @ c + d @ d, _acomm(a, b), _acomm(c, d)])
    return BellMPO.from_stack(mats, gauge_tag=GaugeTag.RAW, validate=mpo.validate)


def recurrence_double_step(mpo: BellMPO) -> BellMPO:
    """Two 2->1 recurrence steps in one map (unnormalised, ungauged).

    A -> (A^2+B^2)^2 + (C^2+D^2)^2,   B -> {A,B}^2 + {C,D}^2,
    C -> {A^2+B^2, C^2+D^2},          D -> {{A,B}, {C,D}}.

    Identical to composing :func:`recurrence_single_step` with itself.
    """
    a, b, c, d = (ch.mat for ch in mpo.coeffs)
    p = a @ a + b @ b
    q = c @ c + d @ d
    r = _acomm(a, b)
    s = _acomm(c, d)
    mats = np.stack([p @ p + q @ q, r @ r + s @ s, _acomm(p, q), _acomm(r, s)])
    return BellMPO.from_stack(mats, gauge_tag=GaugeTag.RAW, validate=mpo.validate)


def success_probability(mpo: BellMPO, length: int) -> float:
    """Post-selection probability of one parallel recurrence round on L pairs.

    Tr[E_out^(L/2)] / Tr[E_in^L] with E_out the transfer channel of the raw
    (pre-rescaling) step output; clamped to [0, 1 + 1e-9].
    """
    if length % 2 != 0:
        raise ValueError("chain length must be even for a 2->1 round")
    norm_in = contract_trace(transfer(mpo), length)
    if norm_in <= 1e-14:
        raise DegenerateStateError("vanishing input normaliser")
    out = recurrence_single_step(mpo)
    p = contract_trace(transfer(out), length // 2) / norm_in
    if p > 1.0 + 1e-9:
        raise ConstructionError(f"success probability {p} exceeds 1")
    return float(min(max(p, 0.0), 1.0 + 1e-9))


# ---------------------------------------------------------------------------
# computational basis form of the recurrence step
# ---------------------------------------------------------------------------

# sign of each Bell vector on the computational pair basis |ab>, times sqrt(2):
# rows phi+, phi-, psi+, psi-; columns 00, 01, 10, 11.
_BELL_SIGNS = np.array(
    [
        [1, 0, 0, 1],
        [1, 0, 0, -1],
        [0, 1, 1, 0],
        [0, 1, -1, 0],
    ],
    dtype=float,
)


@dataclass(frozen=True)
class ComputationalMPO:
    """MPO coefficients indexed by computational pair labels (u, v).

    blocks[u, v] is the coefficient matrix for |u><v| with u, v in
    {00, 01, 10, 11} (Alice bit, Bob bit).  The Bell-diagonal subspace maps
    onto these via X^{u,v} = sum_k s_k[u] s_k[v] M^k with the sign table s,
    whose inverse carries a 1/4; the round trip is exactly the identity.
    """

    d: int
    blocks: np.ndarray  # shape (4, 4, d^2, d^2)


def computational_from_bell(mpo: BellMPO) -> ComputationalMPO:
    mats = mpo.stack
    blocks = np.einsum("ku,kv,kij->uvij", _BELL_SIGNS, _BELL_SIGNS, mats)
    return ComputationalMPO(mpo.d, blocks)


def bell_from_computational(cmpo: ComputationalMPO, validate: bool = True) -> BellMPO:
    mats = 0.25 * np.einsum("ku,kv,uvij->kij", _BELL_SIGNS, _BELL_SIGNS, cmpo.blocks)
    return BellMPO.from_stack(mats, gauge_tag=GaugeTag.RAW, validate=validate)


def computational_step(cmpo: ComputationalMPO) -> ComputationalMPO:
    """Local-isometry stage of the recurrence step: X^{u,v} -> (X^{u,v})^2."""
    return ComputationalMPO(cmpo.d, cmpo.blocks @ cmpo.blocks)


# ---------------------------------------------------------------------------
# five-qubit code pattern tables
# ---------------------------------------------------------------------------

def _str_to_xz(s: str) -> np.ndarray:
    return np.array([_PAULI_XZ[c] for c in s], dtype=np.int64)  # (5, 2)


def _symplectic(a: np.ndarray, b: np.ndarray) -> int:
    """0 if the Pauli strings commute, 1 if they anticommute."""
    return int((a[:, 0] @ b[:, 1] + a[:, 1] @ b[:, 0]) % 2)


def _pattern_array() -> np.ndarray:
    """All 4^5 Bell-index patterns, big-endian site order, shape (1024, 5)."""
    idx = np.arange(4**5)
    return np.stack([(idx // 4**k) % 4 for k in range(4, -1, -1)], axis=1)


@dataclass(frozen=True)
class PatternClassification:
    """Syndrome decoding tables for the 5->1 distillation step.

    class_of[p] is the output Bell index of pattern p (patterns indexed
    big-endian over the five sites); syndrome_of[p] the 4-bit syndrome;
    correction_of[s] the minimum-weight five-site Pauli string for syndrome s.
    """

    class_of: np.ndarray
    syndrome_of: np.ndarray
    correction_of: tuple
    patterns: np.ndarray = field(default_factory=_pattern_array)

    def class_members(self, k: int) -> np.ndarray:
        return np.nonzero(self.class_of == k)[0]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "bell_order": list(BELL_LABELS),
            "stabilizer_generators": list(STABILIZER_GENERATORS),
            "logical_x": LOGICAL_X,
            "logical_z": LOGICAL_Z,
            "corrections": {format(s, "04b"): c for s, c in enumerate(self.correction_of)},
            "patterns": [
                {
                    "pattern": [int(x) for x in self.patterns[p]],
                    "class": int(self.class_of[p]),
                    "syndrome": format(int(self.syndrome_of[p]), "04b"),
                    "correction": self.correction_of[int(self.syndrome_of[p])],
                }
                for p in range(4**5)
            ],
        }


def _min_weight_corrections(gens_xz) -> tuple:
    """Map each 4-bit syndrome to its weight <= 1 Pauli string (a bijection)."""
    table = {}
    candidates = ["IIIII"]
    for site in range(5):
        for p in "XYZ":
            candidates.append("".join(p if i == site else "I" for i in range(5)))
    for cand in candidates:
        e = _str_to_xz(cand)
        s = 0
        for k, g in enumerate(gens_xz):
            s |= _symplectic(g, e) << k
        if s in table:
            raise ConstructionError(f"syndrome collision between {table[s]} and {cand}")
        table[s] = cand
    if len(table) != 16:
        raise ConstructionError("weight <= 1 corrections do not cover all syndromes")
    return tuple(table[s] for s in range(16))


def build_pattern_tables() -> PatternClassification:
    """Classify all 4^5 five-pair Bell-index patterns by syndrome decoding.

    Each pattern is read as a Pauli error string on one half of the five
    pairs.  Its syndrome against the stabilizer generators selects the
    minimum-weight correction; the residual (pattern * correction) lies in
    the code's normalizer and its logical coset fixes the output Bell index:
    stabilizer -> phi+, logical-X coset -> psi+, logical-Z coset -> phi-,
    logical-Y coset -> psi- (in the frame declared above).
    """
    gens = [_str_to_xz(g) for g in STABILIZER_GENERATORS]
    lx = _str_to_xz(LOGICAL_X)
    lz = _str_to_xz(LOGICAL_Z)
    corrections = _min_weight_corrections(gens)
    corrections_xz = [_str_to_xz(c) for c in corrections]

    patterns = _pattern_array()
    class_of = np.zeros(4**5, dtype=np.int64)
    syndrome_of = np.zeros(4**5, dtype=np.int64)
    coset_to_class = {(0, 0): 0, (0, 1): 1, (1, 0): 2, (1, 1): 3}
    for p, pat in enumerate(patterns):
        e = np.array([BELL_TO_XZ[x] for x in pat], dtype=np.int64)
        s = 0
        for k, g in enumerate(gens):
            s |= _symplectic(g, e) << k
        r = (e + corrections_xz[s]) % 2
        has_x = _symplectic(r, lz)  # anticommutes with logical Z => X component
        has_z = _symplectic(r, lx)  # anticommutes with logical X => Z component
        class_of[p] = coset_to_class[(has_x, has_z)]
        syndrome_of[p] = s

    counts = np.bincount(class_of, minlength=4)
    if not np.all(counts == 256):
        raise ConstructionError(f"output class sizes {counts.tolist()} != [256]*4")
    return PatternClassification(class_of=class_of, syndrome_of=syndrome_of,
                                 correction_of=corrections, patterns=patterns)


_TABLES_CACHE = None


def pattern_tables() -> PatternClassification:
    """Cached pattern tables (construction is deterministic)."""
    global _TABLES_CACHE
    if _TABLES_CACHE is None:
        _TABLES_CACHE = build_pattern_tables()
    return _TABLES_CACHE


def five_qubit_step(mpo: BellMPO, tables: PatternClassification | None = None) -> BellMPO:
    """One deterministic 5->1 distillation step.

    Each output coefficient is the sum, over the 256 patterns of its class,
    of the ordered five-fold products M^{p_1} ... M^{p_5} (site order left to
    right).  The transfer channel maps to its fifth power exactly.
    """
    if tables is None:
        tables = pattern_tables()
    mats = mpo.stack
    pats = tables.patterns
    prod = mats[pats[:, 0]]
    for i in range(1, 5):
        prod = prod @ mats[pats[:, i]]
    out = np.stack([prod[tables.class_of == k].sum(axis=0) for k in range(4)])
    return BellMPO.from_stack(out, gauge_tag=mpo.gauge_tag, validate=mpo.validate)


# ---------------------------------------------------------------------------
# flow driver
# ---------------------------------------------------------------------------

@dataclass
class FlowRound:
    n: int
    eps: float
    tau: float
    kappa: float
    delta: float
    chain_length: int | None
    fidelity_chain: float | None
    fidelity_infinite: float
    success: float | None


@dataclass
class FlowTrace:
    """Per-round record of a distillation flow."""

    protocol: str
    rounds: list
    status: str = "ok"
    message: str = ""

    @property
    def diverged(self) -> bool:
        if len(self.rounds) < 2:
            return False
        return self.rounds[-1].eps > self.rounds[0].eps

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "protocol": self.protocol,
            "status": self.status,
            "message": self.message,
            "diverged": self.diverged,
            "rounds": [
                {
                    "n": r.n,
                    "eps": r.eps,
                    "tau": r.tau,
                    "kappa": r.kappa,
                    "delta": r.delta,
                    "chain_length": r.chain_length,
                    "fidelity_chain": r.fidelity_chain,
                    "fidelity_infinite": r.fidelity_infinite,
                    "success": r.success,
                }
                for r in self.rounds
            ],
        }


def _record(mpo, n, length, tau_fn, kappa, delta, success, seed) -> FlowRound:
    fid_l = fidelity(mpo, length) if length is not None and length >= 1 else None
    return FlowRound(
        n=n,
        eps=epsilon(mpo),
        tau=tau_fn(mpo, seed=seed),
        kappa=kappa,
        delta=delta,
        chain_length=length if length is not None and length >= 1 else None,
        fidelity_chain=fid_l,
        fidelity_infinite=fidelity_infinite(mpo),
        success=success,
    )


def distill_flow(
    mpo: BellMPO,
    protocol: Protocol | str,
    rounds: int,
    chain_length: int = 64,
    seed: int = 0,
) -> FlowTrace:
    """Iterate a distillation protocol, recording one entry per round.

    Recurrence rounds are double steps with a re-gauge (anchor A) after each;
    the chain length shrinks by 4 per round.  Five-qubit rounds are single
    steps after one initial gauge that makes the transfer channel
    trace-preserving; the chain length shrinks by 5 per round.  Round 0
    records the gauged input.  A gauge failure terminates the flow with a
    partial trace and status "gauge_failure".
    """
    protocol = Protocol(protocol)
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    trace = FlowTrace(protocol=protocol.value, rounds=[])
    length = chain_length
    try:
        if protocol is Protocol.RECURRENCE:
            cur, _ = canonical_gauge(mpo, anchor="A")
            trace.rounds.append(_record(cur, 0, length, tau_A, 1.0, 0.0, None, seed))
            for n in range(1, rounds + 1):
                raw = recurrence_double_step(cur)
                success = None
                if length is not None and length >= 4 and length % 4 == 0:
                    success = contract_trace(transfer(raw), length // 4) / contract_trace(
                        transfer(cur), length
                    )
                cur, gres = canonical_gauge(raw, anchor="A")
                length = length // 4 if length is not None and length >= 4 else None
                trace.rounds.append(
                    _record(cur, n, length, tau_A, gres.kappa, gres.delta, success, seed)
                )
        else:
            cur, _ = canonical_gauge(mpo, anchor="E")
            trace.rounds.append(_record(cur, 0, length, tau_E, 1.0, 0.0, None, seed))
            tables = pattern_tables()
            for n in range(1, rounds + 1):
                cur = five_qubit_step(cur, tables)
                length = length // 5 if length is not None and length >= 5 else None
                trace.rounds.append(_record(cur, n, length, tau_E, 1.0, 0.0, 1.0, seed))
    except GaugeFailureError as exc:
        trace.status = "gauge_failure"
        trace.message = str(exc)
    return trace


def export_pattern_tables(path):
    with open(path, "w") as fh:
        json.dump(pattern_tables().to_json_dict(), fh, sort_keys=True)
