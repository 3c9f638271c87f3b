# core/oracle.py
"""
Dense reference implementation over the full truncated basis.

Enumerates every occupation vector in [0, cutoff]^modes (np.ndindex order),
builds ladder operators as Kronecker products and evaluates the same
operations as core.fock with matrix algebra. Meant for small instances
(<= 6 modes at cutoff 2) in the equivalence suite.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.special import factorial
from scipy.stats import unitary_group

from core.codes import OutOfRange
from core.fock import (
    MixedState,
    PureState,
    annihilate,
    apply_mode_unitary,
    create,
    fidelity,
    from_amplitudes,
    project_pattern,
    trace_modes,
)
from core.registry import ModeRef, ModeRegistry


class DenseOracle:
    def __init__(self, registry: ModeRegistry, cutoff: int):
        self.registry = registry
        self.n_modes = len(registry)
        self.cutoff = int(cutoff)
        self.dim = (self.cutoff + 1) ** self.n_modes
        self.basis: List[Tuple[int, ...]] = [tuple(int(x) for x in b)
                                             for b in np.ndindex(*([self.cutoff + 1] * self.n_modes))]
        self.index: Dict[Tuple[int, ...], int] = {b: i for i, b in enumerate(self.basis)}
        self._ladder = _single_mode_ladder(self.cutoff)

    # ---------------- vectors ----------------
    def vector(self, state: PureState) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        for k, a in state.amplitudes.items():
            v[self.index[k]] += a
        return v

    def state(self, vec: np.ndarray, tol: float = 1e-14) -> Dict[Tuple[int, ...], complex]:
        return {self.basis[i]: complex(vec[i]) for i in np.flatnonzero(np.abs(vec) >= tol)}

    # ---------------- operators ----------------
    def _embed(self, single: sp.spmatrix, k: int) -> sp.csr_matrix:
        eye = sp.identity(self.cutoff + 1, format="csr", dtype=complex)
        op = None
        for i in range(self.n_modes):
            factor = single if i == k else eye
            op = factor if op is None else sp.kron(op, factor, format="csr")
        return op.tocsr()

    def creation(self, mode: ModeRef) -> sp.csr_matrix:
        return self._embed(self._ladder.T.conj(), self.registry.index_of(mode))

    def annihilation(self, mode: ModeRef) -> sp.csr_matrix:
        return self._embed(self._ladder, self.registry.index_of(mode))

    def number(self, mode: ModeRef) -> sp.csr_matrix:
        return self.creation(mode) @ self.annihilation(mode)

    def projector(self, mode: ModeRef, n: int) -> sp.csr_matrix:
        k = self.registry.index_of(mode)
        diag = np.array([1.0 if b[k] == n else 0.0 for b in self.basis])
        return sp.diags(diag, format="csr")

    def apply_unitary(self, vec: np.ndarray, modes: Sequence[ModeRef], U) -> np.ndarray:
        """U|ψ> = Σ_n ψ_n Π_k (Σ_j U_jk A_j†)^{n_k} / √(n_k!) |rest>."""
        U = np.asarray(U, dtype=complex)
        idx = self.registry.indices(modes)
        creators = [self.creation(m) for m in idx]
        rotated = []
        for k in range(len(idx)):
            op = sp.csr_matrix((self.dim, self.dim), dtype=complex)
            for j in range(len(idx)):
                if U[j, k] != 0:
                    op = op + U[j, k] * creators[j]
            rotated.append(op)
        out = np.zeros(self.dim, dtype=complex)
        for i in np.flatnonzero(vec):
            occ = list(self.basis[i])
            sub = [occ[m] for m in idx]
            for m in idx:
                occ[m] = 0
            col = np.zeros(self.dim, dtype=complex)
            col[self.index[tuple(occ)]] = 1.0
            for k, n in enumerate(sub):
                for _ in range(n):
                    col = rotated[k] @ col
                col = col / np.sqrt(float(factorial(n, exact=True)))
            out += vec[i] * col
        return out

    # ---------------- mixed states ----------------
    def density(self, state) -> np.ndarray:
        mixed = MixedState.of(state)
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        for b in mixed.branches:
            v = self.vector(b)
            rho += b.weight * np.outer(v, v.conj()) / np.vdot(v, v).real
        return rho

    def traced_weights(self, vec: np.ndarray, modes: Sequence[ModeRef]) -> Dict[Tuple[int, ...], float]:
        idx = self.registry.indices(modes)
        out: Dict[Tuple[int, ...], float] = {}
        probs = np.abs(vec) ** 2
        total = probs.sum()
        for i in np.flatnonzero(probs):
            key = tuple(self.basis[i][m] for m in idx)
            out[key] = out.get(key, 0.0) + probs[i] / total
        return out

    def reduced_density(self, vec: np.ndarray, modes: Sequence[ModeRef]) -> np.ndarray:
        """Trace the listed modes; the result lives in the full basis with those modes at 0."""
        idx = self.registry.indices(modes)
        vec = vec / np.linalg.norm(vec)
        groups: Dict[Tuple[int, ...], np.ndarray] = {}
        for i in np.flatnonzero(vec):
            key = tuple(self.basis[i][m] for m in idx)
            occ = list(self.basis[i])
            for m in idx:
                occ[m] = 0
            g = groups.setdefault(key, np.zeros(self.dim, dtype=complex))
            g[self.index[tuple(occ)]] += vec[i]
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        for g in groups.values():
            rho += np.outer(g, g.conj())
        return rho

    def fidelity(self, state, reference: PureState) -> float:
        rho = self.density(state)
        r = self.vector(reference)
        r = r / np.linalg.norm(r)
        tr = np.trace(rho).real
        return float((r.conj() @ rho @ r).real / tr)


@lru_cache(maxsize=None)
def _single_mode_ladder(cutoff: int) -> sp.csr_matrix:
    """Single-mode annihilation operator a|n> = √n |n-1> on span{|0>..|cutoff>}."""
    return sp.diags(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), offsets=1, format="csr").astype(complex)


# --------------------------------------------------------------------
# Randomized sweep: sparse engine vs dense reference
# --------------------------------------------------------------------
SWEEP_REGISTRY = ModeRegistry.for_qubits(["a"]).with_loss_modes(["x", "y"])
SWEEP_KINDS = ("unitary", "ladder", "projection", "mixed")


def random_sparse_state(registry: ModeRegistry, cutoff: int, rng: np.random.Generator,
                        terms: int = 0, max_occupation: int = -1) -> PureState:
    terms = terms or int(rng.integers(1, 6))
    high = cutoff if max_occupation < 0 else max_occupation
    amps = {}
    for _ in range(terms):
        key = tuple(int(x) for x in rng.integers(0, high + 1, size=len(registry)))
        amps[key] = complex(rng.normal(), rng.normal())
    return from_amplitudes(registry, amps, cutoff)


def random_modes(registry: ModeRegistry, rng: np.random.Generator, k: int) -> List[str]:
    names = registry.names
    return [names[i] for i in rng.choice(len(names), size=k, replace=False)]


def random_unitary(k: int, rng: np.random.Generator) -> np.ndarray:
    if k == 1:
        return np.array([[np.exp(1j * rng.uniform(0.0, 2 * np.pi))]])
    return unitary_group.rvs(k, random_state=int(rng.integers(2 ** 31)))


def sweep_case(oracle: DenseOracle, kind: str, rng: np.random.Generator) -> float:
    """Largest absolute deviation between core.fock and the dense reference on one random instance."""
    reg, cutoff = oracle.registry, oracle.cutoff
    st = random_sparse_state(reg, cutoff, rng)
    v = oracle.vector(st)
    if kind == "unitary":
        k = int(rng.integers(1, 4))
        modes = random_modes(reg, rng, k)
        U = random_unitary(k, rng)
        dense = oracle.apply_unitary(v, modes, U)
        return float(np.max(np.abs(oracle.vector(apply_mode_unitary(st, modes, U)) - dense)))
    if kind == "ladder":
        mode = random_modes(reg, rng, 1)[0]
        up = np.max(np.abs(oracle.vector(create(st, mode)) - oracle.creation(mode) @ v))
        down = np.max(np.abs(oracle.vector(annihilate(st, mode)) - oracle.annihilation(mode) @ v))
        return float(max(up, down))
    if kind == "projection":
        modes = random_modes(reg, rng, int(rng.integers(1, 3)))
        counts = [int(c) for c in rng.integers(0, cutoff + 1, size=len(modes))]
        P = oracle.projector(modes[0], counts[0])
        for m, c in zip(modes[1:], counts[1:]):
            P = P @ oracle.projector(m, c)
        expected = float(np.vdot(P @ v, P @ v).real / np.vdot(v, v).real)
        return abs(project_pattern(st, modes, counts)[1] - expected)
    if kind == "mixed":
        other, ref = random_sparse_state(reg, cutoff, rng), random_sparse_state(reg, cutoff, rng)
        mixed = MixedState((st.with_weight(0.3), other.with_weight(0.7)))
        fid = abs(fidelity(mixed, ref) - oracle.fidelity(mixed, ref))
        modes = random_modes(reg, rng, 2)
        traced = oracle.density(trace_modes(st, modes))
        return float(max(fid, np.max(np.abs(traced - oracle.reduced_density(v, modes)))))
    raise OutOfRange(f"unknown sweep kind {kind!r}")


def sweep_deviation(cases: int = 1000, seed: int = 0, cutoff: int = 2,
                    registry: ModeRegistry = SWEEP_REGISTRY) -> float:
    """Worst deviation over ``cases`` instances, cycling through SWEEP_KINDS; case c uses default_rng([seed, c])."""
    oracle = DenseOracle(registry, cutoff)
    worst = 0.0
    for c in range(cases):
        kind = SWEEP_KINDS[c % len(SWEEP_KINDS)]
        worst = max(worst, sweep_case(oracle, kind, np.random.default_rng([seed, c])))
    return worst
