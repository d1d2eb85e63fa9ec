"""Independent brute-force verification of the distillation machinery.

Two derivation paths exist for every protocol ingredient:

* the recurrence block table is rebuilt by explicit 4-qubit state-vector
  simulation of two Bell pairs through the local isometries and bilateral
  Hadamards, with no reference to the polynomial update rules;
* the five-qubit pattern classification is rebuilt by dense 10-qubit
  simulation (syndrome expectations, minimum-weight correction, logical Bell
  readout) and must agree with the binary symplectic tables pattern by
  pattern;
* ``oracle_step_distribution`` pushes every Bell string of a short chain
  through the block tables and compares the output distribution against the
  MPO-level step.

``inequality_suite`` stress-tests the norm/ergodicity/perturbation bounds on
randomly generated channel instances drawn inside each bound's hypotheses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .channels import (
    ChannelMatrix,
    ergodicity,
    fundamental_channel,
    norm_1to1_general,
    norm_1to1_positive,
    operator_norm,
    perron_left,
    steady_state,
    unvec,
    vec,
)
from .exceptions import ConstructionError
from .mpo import (
    BellMPO,
    GaugeTag,
    all_string_weights,
    canonical_gauge,
    contract_trace,
    epsilon,
    transfer,
)
from .physmodel import BELL_VECTORS
from .protocols import (
    LOGICAL_X,
    LOGICAL_Z,
    STABILIZER_GENERATORS,
    Protocol,
    five_qubit_step,
    pattern_tables,
    recurrence_double_step,
    recurrence_single_step,
)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
BELL_TO_PAULI = "IZXY"  # phi+ <-> I, phi- <-> Z, psi+ <-> X, psi- <-> Y


# ---------------------------------------------------------------------------
# random instance generation
# ---------------------------------------------------------------------------

def random_cp_channel(rng: np.random.Generator, d: int, n_kraus=None, scale: float = 1.0) -> ChannelMatrix:
    """CP map from 2-4 random Gaussian Kraus operators, scaled to 1->1 norm `scale`."""
    if n_kraus is None:
        n_kraus = int(rng.integers(2, 5))
    kraus = [
        (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2 * d)
        for _ in range(n_kraus)
    ]
    ch = ChannelMatrix.from_kraus(kraus)
    return ch * (scale / norm_1to1_positive(ch))


def random_tp_channel(rng: np.random.Generator, d: int, n_kraus=None) -> ChannelMatrix:
    """Trace-preserving CP map: random Kraus set with normalisation enforced."""
    if n_kraus is None:
        n_kraus = int(rng.integers(2, 5))
    kraus = [
        rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        for _ in range(n_kraus)
    ]
    m = sum(k.conj().T @ k for k in kraus)
    w, u = np.linalg.eigh(m)
    m_invsqrt = (u * (1.0 / np.sqrt(w))) @ u.conj().T
    return ChannelMatrix.from_kraus([k @ m_invsqrt for k in kraus])


def random_bell_mpo(rng: np.random.Generator, d: int, eps_scale: float = 0.15) -> BellMPO:
    """Random CP Bell-diagonal MPO with trace-preserving dominant channel.

    The three noise channels are scaled so their 1->1 norms are at most
    eps_scale (the largest one equals it), putting the instance in the
    A-trace-preserving gauge by construction.
    """
    a = random_tp_channel(rng, d)
    scales = eps_scale * rng.uniform(0.3, 1.0, size=3)
    scales[int(rng.integers(0, 3))] = eps_scale
    noise = [random_cp_channel(rng, d, scale=s) for s in scales]
    return BellMPO(d, a, *noise, gauge_tag=GaugeTag.A_TP)


def random_cp_bell_mpo(rng: np.random.Generator, d: int) -> BellMPO:
    """Generic CP Bell-diagonal MPO with a dominant first coefficient."""
    a = random_cp_channel(rng, d, scale=1.0)
    noise = [random_cp_channel(rng, d, scale=float(rng.uniform(0.02, 0.3))) for _ in range(3)]
    return BellMPO(d, a, *noise, gauge_tag=GaugeTag.RAW)


# ---------------------------------------------------------------------------
# recurrence block table from explicit circuit simulation
# ---------------------------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def recurrence_block_table():
    """(i, j) -> (kept, output index, weight) by 4-qubit state-vector simulation.

    Both parties apply the isometry merging their two qubits (CNOT, measure,
    keep matching outcomes, discard the measured qubit), then a bilateral
    Hadamard.  Qubit order (A1, B1, A2, B2); summing the two kept measurement
    branches reproduces the physical post-selected map.
    """
    hh = np.kron(_H, _H)
    table = {}
    for i in range(4):
        for j in range(4):
            psi = np.kron(BELL_VECTORS[i], BELL_VECTORS[j]).reshape(2, 2, 2, 2)
            out_rho = np.zeros((4, 4), dtype=complex)
            for branch in (0, 1):
                # K_branch = sum_a |a><a, a + branch| on each party's two qubits
                kept = np.zeros((2, 2), dtype=complex)
                for a in range(2):
                    for b in range(2):
                        kept[a, b] = psi[a, b, a ^ branch, b ^ branch]
                kept = hh @ kept.reshape(4)
                out_rho += np.outer(kept, kept.conj())
            weight = float(np.trace(out_rho).real)
            if weight < 1e-12:
                table[(i, j)] = (False, -1, 0.0)
                continue
            overlaps = np.array(
                [np.real(bv.conj() @ out_rho @ bv) for bv in BELL_VECTORS]
            )
            k = int(np.argmax(overlaps))
            if abs(overlaps[k] - weight) > 1e-12:
                raise ConstructionError("kept branch is not a pure Bell state")
            table[(i, j)] = (True, k, weight)
    return table


# ---------------------------------------------------------------------------
# five-qubit classification from dense 10-qubit simulation
# ---------------------------------------------------------------------------

def _apply_pauli_string(state: np.ndarray, pauli: str, qubits) -> np.ndarray:
    """Apply one-qubit Paulis at the given positions of a 10-qubit state."""
    out = state.reshape((2,) * 10)
    for p, q in zip(pauli, qubits):
        if p == "I":
            continue
        out = np.moveaxis(np.tensordot(PAULI[p], out, axes=([1], [q])), 0, q)
    return out.reshape(-1)


def _pair_expectation(state: np.ndarray, pauli: str) -> float:
    """<state| P^(A) o P^(B) |state> for a five-site Pauli string P."""
    tmp = _apply_pauli_string(state, pauli, range(5))
    tmp = _apply_pauli_string(tmp, pauli, range(5, 10))
    val = np.vdot(state, tmp)
    if abs(val.imag) > 1e-12 or abs(abs(val.real) - 1.0) > 1e-12:
        raise ConstructionError(f"expectation {val} is not +-1")
    return float(val.real)


def _phi_plus_5() -> np.ndarray:
    """|phi+>^(o 5) with Alice qubits 0-4 and Bob qubits 5-9."""
    state = np.zeros(1024, dtype=complex)
    for a in range(32):
        state[(a << 5) | a] = 2.0 ** (-2.5)
    return state


def simulate_five_qubit_classes() -> np.ndarray:
    """Output class of each Bell-index pattern by direct 10-qubit simulation.

    The relative syndrome is read off the deterministic expectations of the
    doubled stabilizer generators; the minimum-weight correction (calibrated
    from simulated weight <= 1 syndromes, independently of the symplectic
    tables) is applied on Alice's side, and the logical Bell index follows
    from the signs of the doubled logical operators relative to the
    error-free baseline.
    """
    base = _phi_plus_5()

    def syndrome_of_state(state):
        s = 0
        for k, g in enumerate(STABILIZER_GENERATORS):
            if _pair_expectation(state, g) < 0:
                s |= 1 << k
        return s

    # correction lookup from simulated weight <= 1 errors
    corrections = {}
    candidates = ["IIIII"] + [
        "".join(p if i == site else "I" for i in range(5))
        for site in range(5)
        for p in "XYZ"
    ]
    for cand in candidates:
        s = syndrome_of_state(_apply_pauli_string(base, cand, range(5)))
        if s in corrections:
            raise ConstructionError("simulated syndromes are not distinct")
        corrections[s] = cand

    bx = _pair_expectation(base, LOGICAL_X)
    bz = _pair_expectation(base, LOGICAL_Z)

    classes = np.zeros(4**5, dtype=np.int64)
    coset_to_class = {(0, 0): 0, (0, 1): 1, (1, 0): 2, (1, 1): 3}
    for p in range(4**5):
        pat = [(p // 4**k) % 4 for k in range(4, -1, -1)]
        err = "".join(BELL_TO_PAULI[x] for x in pat)
        state = _apply_pauli_string(base, err, range(5))
        corr = corrections[syndrome_of_state(state)]
        state = _apply_pauli_string(state, corr, range(5))
        rx = _pair_expectation(state, LOGICAL_X) * bx
        rz = _pair_expectation(state, LOGICAL_Z) * bz
        has_z = int(rx < 0)  # logical-X readout flipped => Z-type residual
        has_x = int(rz < 0)
        classes[p] = coset_to_class[(has_x, has_z)]
    return classes


_SIM_CLASSES_CACHE = None


def simulated_five_qubit_classes() -> np.ndarray:
    global _SIM_CLASSES_CACHE
    if _SIM_CLASSES_CACHE is None:
        _SIM_CLASSES_CACHE = simulate_five_qubit_classes()
    return _SIM_CLASSES_CACHE


# ---------------------------------------------------------------------------
# step distributions by exhaustive enumeration
# ---------------------------------------------------------------------------

def oracle_step_distribution(mpo: BellMPO, protocol: Protocol | str, n_blocks: int):
    """Output-string distribution of one protocol step by string enumeration.

    Enumerates every input Bell string of N * n_blocks sites (N = 2 or 5),
    weights it by the chain trace, pushes each block through the
    circuit-level classification, and accumulates the output masses
    (renormalising for the post-selected recurrence).  Input size is capped
    at 10 sites.
    """
    protocol = Protocol(protocol)
    n = 2 if protocol is Protocol.RECURRENCE else 5
    length = n * n_blocks
    if length > 10:
        raise ValueError(f"oracle enumeration capped at 10 sites, got {length}")
    weights = all_string_weights(mpo, length)

    if protocol is Protocol.RECURRENCE:
        table = recurrence_block_table()
        k = np.zeros((4, 4, 4))
        for (i, j), (keep, out, w) in table.items():
            if keep:
                k[i, j, out] = w
        dist = weights
        for _ in range(n_blocks):
            dist = np.tensordot(dist, k, axes=([0, 1], [0, 1]))
        total = dist.sum()
        if total <= 1e-14:
            raise ConstructionError("post-selection kept no probability mass")
        return dist / total

    classes = simulated_five_qubit_classes()
    onehot = np.zeros((4**5, 4))
    onehot[np.arange(4**5), classes] = 1.0
    flat = weights.reshape((4**5,) * n_blocks)
    if n_blocks == 1:
        dist = onehot.T @ flat
    else:
        dist = onehot.T @ flat @ onehot
    return dist / weights.sum()


def mpo_step_distribution(mpo: BellMPO, protocol: Protocol | str, n_blocks: int):
    """Output-string distribution predicted by the MPO-level step."""
    protocol = Protocol(protocol)
    stepped = (
        recurrence_single_step(mpo)
        if protocol is Protocol.RECURRENCE
        else five_qubit_step(mpo)
    )
    w = all_string_weights(stepped, n_blocks)
    return w / w.sum()


# ---------------------------------------------------------------------------
# randomized inequality suite
# ---------------------------------------------------------------------------

@dataclass
class InequalityReport:
    name: str
    samples: int
    violations: int
    worst_margin: float
    seed: int

    def to_json_dict(self):
        return {
            "name": self.name,
            "samples": self.samples,
            "violations": self.violations,
            "worst_margin": self.worst_margin,
            "seed": self.seed,
        }


def _dims_for(i: int):
    return 2 if i % 2 == 0 else 3


def _check_trace_bound(rng, i, seed):
    d = _dims_for(i)
    e = random_tp_channel(rng, d)
    tau = ergodicity(e, seed=seed)
    margin = np.inf
    for length in range(1, 9):
        lhs = abs(contract_trace(e, length) - 1.0)
        margin = min(margin, d**2.5 * tau**length - lhs)
    return margin


def _check_norm_bound(rng, i, seed):
    d = _dims_for(i)
    e = random_tp_channel(rng, d)
    tau = ergodicity(e, seed=seed)
    if tau >= 0.9995:
        return np.inf  # hypothesis d^{5/2} tau^L < 1 unreachable at sane L
    obs = random_cp_channel(rng, d, scale=float(rng.uniform(0.1, 2.0)))
    length = max(2, int(np.ceil(np.log(0.5 / d**2.5) / np.log(tau))) if tau > 0 else 2)
    epow = np.linalg.matrix_power(e.mat, length - 1)
    lhs = float(np.real(np.trace(obs.mat @ epow)) / contract_trace(e, length))
    rhs = norm_1to1_positive(obs) * (1 + d**2.5 * tau ** (length - 1)) / (
        1 - d**2.5 * tau**length
    )
    return rhs - lhs


def _perturbed_pair(rng, d, seed, target_k: float):
    """(F1, F2, tau1, k) with F1 TP, F2 = (F1 + P)/lam of spectral radius 1."""
    f1 = random_tp_channel(rng, d)
    tau1 = ergodicity(f1, seed=seed)
    if tau1 > 0.93:
        return None
    strength = target_k * (1 - tau1) / (1 + tau1) / 2.0
    pert = random_cp_channel(rng, d, scale=strength)
    lam = max(abs(np.linalg.eigvals(f1.mat + pert.mat)))
    f2 = (f1 + pert) * (1.0 / lam)
    diff = norm_1to1_general(f1 - f2, seed=seed)
    k = (1 + tau1) / (1 - tau1) * diff
    if k >= 0.45:
        return None
    return f1, f2, tau1, k


def _perron_unit(f2: ChannelMatrix, rho1: np.ndarray) -> np.ndarray:
    """Left Perron operator of f2 (eigenvalue 1), scaled so Tr(rho1 xi) = 1."""
    w, v = np.linalg.eig(f2.dual().mat)
    idx = int(np.argmax(np.abs(w)))
    xi = unvec(v[:, idx], f2.dim)
    xi = 0.5 * (xi + xi.conj().T)
    scale = np.trace(rho1 @ xi).real
    if abs(scale) < 1e-12:
        raise ConstructionError("Perron normalisation degenerate")
    return xi / scale


def _check_eigenvector_perturbation(rng, i, seed):
    d = _dims_for(i)
    pair = _perturbed_pair(rng, d, seed, target_k=float(rng.uniform(0.05, 0.4)))
    if pair is None:
        return np.inf
    f1, f2, tau1, k = pair
    xi = _perron_unit(f2, steady_state(f1))
    lhs = operator_norm(np.eye(d) - xi)
    return k / (1 - k) - lhs


def _check_fundamental_bound(rng, i, seed):
    d = _dims_for(i)
    pair = _perturbed_pair(rng, d, seed, target_k=float(rng.uniform(0.05, 0.3)))
    if pair is None:
        return np.inf
    f1, f2, _, _ = pair
    z1 = fundamental_channel(f1)
    nz = norm_1to1_general(z1, seed=seed)
    nd = norm_1to1_general(f1 - f2, seed=seed)
    if nz * nd >= 0.9:
        return np.inf
    xi = _perron_unit(f2, steady_state(f1))
    lhs = operator_norm(np.eye(d) - xi)
    return nz * nd / (1 - nz * nd) - lhs


def _check_fundamental_norm(rng, i, seed):
    d = _dims_for(i)
    f = random_tp_channel(rng, d)
    tau = ergodicity(f, seed=seed)
    if tau > 0.98:
        return np.inf
    nz = norm_1to1_general(fundamental_channel(f), seed=seed)
    return (1 + tau) / (1 - tau) - nz


def _check_ergodicity_difference(rng, i, seed):
    d = _dims_for(i)
    f1 = random_tp_channel(rng, d)
    f2 = random_tp_channel(rng, d)
    t1 = ergodicity(f1, seed=seed)
    t2 = ergodicity(f2, seed=seed)
    tdiff = ergodicity(f1 - f2, seed=seed)
    return tdiff - abs(t1 - t2)


def _check_gauge_bounds(rng, i, seed):
    d = _dims_for(i)
    h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = 0.5 * (h + h.conj().T)
    delta = float(rng.uniform(0.05, 0.9))
    h *= delta / operator_norm(h)
    xi = np.eye(d) + h
    w, u = np.linalg.eigh(xi)
    rt = (u * np.sqrt(w)) @ u.conj().T
    s = ChannelMatrix.conjugation(rt)
    s_inv = ChannelMatrix.conjugation(np.linalg.inv(rt))
    ident = ChannelMatrix.identity(d)
    margins = [
        (1 + delta) - operator_norm(xi),
        1.0 / (1 - delta) - operator_norm(np.linalg.inv(xi)),
        3 * delta - norm_1to1_general(ident - s, seed=seed),
        3 * delta / (1 - delta) - norm_1to1_general(ident - s_inv, seed=seed),
    ]
    return min(margins)


def _noise_mpo_instance(rng, i, seed):
    d = _dims_for(i)
    mpo = random_bell_mpo(rng, d, eps_scale=float(rng.uniform(0.02, 0.12)))
    eps = epsilon(mpo)
    tau = tau_a = ergodicity(mpo.A, seed=seed)
    z = (1 + tau**4) / (1 - tau**4)
    k = z * (4 * eps**2 + 10 * eps**4)
    if k >= 0.45:
        return None
    return mpo, eps, tau, k


def _check_condition_number(rng, i, seed):
    inst = _noise_mpo_instance(rng, i, seed)
    if inst is None:
        return np.inf
    mpo, eps, tau, k = inst
    _, gres = canonical_gauge(recurrence_double_step(mpo), anchor="A")
    return 1.0 / (1 - 2 * k) - gres.kappa


def _check_eps_double_step(rng, i, seed):
    inst = _noise_mpo_instance(rng, i, seed)
    if inst is None:
        return np.inf
    mpo, eps, _, _ = inst
    raw = recurrence_double_step(mpo)
    eps_raw = epsilon(raw)
    return 4 * (1 + eps**2) * eps**2 - eps_raw


def _check_noise_perturbation_norm(rng, i, seed):
    inst = _noise_mpo_instance(rng, i, seed)
    if inst is None:
        return np.inf
    mpo, eps, _, _ = inst
    a, b, c, d = (ch.mat for ch in mpo.coeffs)
    a2, b2 = a @ a, b @ b
    q = c @ c + d @ d
    pert = a2 @ b2 + b2 @ a2 + b2 @ b2 + q @ q
    norm_p = norm_1to1_positive(ChannelMatrix(mpo.d, pert))
    return 2 * eps**2 + 5 * eps**4 - norm_p


INEQUALITY_CHECKS = (
    ("trace_bound", _check_trace_bound),
    ("observable_norm_bound", _check_norm_bound),
    ("eigenvector_perturbation", _check_eigenvector_perturbation),
    ("fundamental_channel_bound", _check_fundamental_bound),
    ("fundamental_channel_norm", _check_fundamental_norm),
    ("ergodicity_difference", _check_ergodicity_difference),
    ("gauge_map_bounds", _check_gauge_bounds),
    ("condition_number", _check_condition_number),
    ("eps_double_step", _check_eps_double_step),
    ("noise_perturbation_norm", _check_noise_perturbation_norm),
)


def inequality_suite(seed: int = 0, samples: int = 1000, slack: float = 1e-6, names=None):
    """Randomized check of each bound; returns a list of InequalityReport.

    A sample counts as a violation when its margin (bound minus measured
    value) falls below -slack.  Instances falling outside a bound's
    hypotheses contribute an infinite margin (they are resampled situations,
    reported in `samples` all the same).
    """
    reports = []
    for name, fn in INEQUALITY_CHECKS:
        if names is not None and name not in names:
            continue
        rng = np.random.default_rng(seed)
        violations = 0
        worst = np.inf
        for i in range(samples):
            margin = fn(rng, i, seed)
            if margin < -slack:
                violations += 1
            if margin < worst:
                worst = margin
        reports.append(
            InequalityReport(
                name=name,
                samples=samples,
                violations=violations,
                worst_margin=float(worst) if np.isfinite(worst) else float("inf"),
                seed=seed,
            )
        )
    return reports


def oracle_equivalence_report(seed: int = 0, samples: int = 50, tol: float = 1e-9):
    """Compare MPO steps against the enumeration oracles on random instances.

    Recurrence is checked for bond-channel dimensions 1-3 on 2- and 4-block
    chains; the five-qubit step for dimensions 1-2 on 1- and 2-block chains.
    Returns (mismatches, worst_deviation, checked).
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    mismatches = 0
    checked = 0
    for i in range(samples):
        d = 1 + i % 3
        mpo = random_cp_bell_mpo(rng, d)
        for blocks in (2, 4):
            got = oracle_step_distribution(mpo, Protocol.RECURRENCE, blocks)
            want = mpo_step_distribution(mpo, Protocol.RECURRENCE, blocks)
            dev = float(np.abs(got - want).max())
            worst = max(worst, dev)
            mismatches += dev > tol
            checked += 1
        if d <= 2:
            for blocks in (1, 2):
                got = oracle_step_distribution(mpo, Protocol.FIVE_QUBIT, blocks)
                want = mpo_step_distribution(mpo, Protocol.FIVE_QUBIT, blocks)
                dev = float(np.abs(got - want).max())
                worst = max(worst, dev)
                mismatches += dev > tol
                checked += 1
    return mismatches, worst, checked


def tables_report():
    """Cross-derivation and structural checks of the pattern classification."""
    tables = pattern_tables()
    sim = simulated_five_qubit_classes()
    agree = int(np.sum(tables.class_of == sim))
    counts = np.bincount(tables.class_of, minlength=4).tolist()
    weight = (tables.patterns != 0).sum(axis=1)
    light_ok = bool(np.all(tables.class_of[weight <= 1] == 0))
    return {
        "agreement": agree,
        "total": 4**5,
        "class_sizes": counts,
        "weight_le1_to_phi_plus": light_ok,
    }


def write_suite_report(path, reports, extra=None):
    doc = {
        "schema_version": 1,
        "inequalities": [r.to_json_dict() for r in reports],
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
