"""Sectored states and operators for bipartite systems with particle-number
superselection.

All admissible density operators are block-diagonal in the total particle
number, and all admissible local operators commute with (or uniformly shift)
the local particle number.  This module provides the exact linear-algebra
primitives at desk scale: sectored pure states, block density matrices,
local Kraus sets, sector projections, dephasing, partial traces and the
JSON wire format.

Local basis states are labelled ``(level, internal)`` where ``level`` is the
particle count and ``internal`` indexes the degeneracy within that count.
Amplitudes are double-precision complex throughout.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    MixedTotalNumber,
    ParseError,
    SectorOutOfRange,
    ZeroProbabilityOutcome,
    ZeroVector,
)

Label = tuple  # (level, internal)

ATOL = 1e-12
PSD_FLOOR = -1e-10


def _as_label(x) -> Label:
    """Accept ``n`` as shorthand for the non-degenerate label ``(n, 0)``."""
    if isinstance(x, (int, np.integer)):
        return (int(x), 0)
    n, i = x
    return (int(n), int(i))


# ---------------------------------------------------------------------------
# Local spaces


class LocalSpace:
    """Ordered single-party basis of ``(level, internal)`` labels."""

    def __init__(self, labels):
        labels = tuple(_as_label(l) for l in labels)
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate local labels")
        self.labels = labels
        self._index = {l: i for i, l in enumerate(labels)}
        self.levels = tuple(sorted({l[0] for l in labels}))

    @property
    def dim(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        label = _as_label(label)
        try:
            return self._index[label]
        except KeyError:
            raise DimensionMismatch(f"label {label} not in local space") from None

    def __contains__(self, label) -> bool:
        return _as_label(label) in self._index

    def level_dim(self, n: int) -> int:
        return sum(1 for l in self.labels if l[0] == n)

    def indices_at_level(self, n: int):
        return np.array([i for i, l in enumerate(self.labels) if l[0] == n], dtype=int)

    @classmethod
    def qudit(cls, levels: int) -> "LocalSpace":
        """Single site with non-degenerate particle counts ``0..levels-1``."""
        return cls([(n, 0) for n in range(levels)])

    @classmethod
    def modes(cls, k: int) -> "LocalSpace":
        """``k`` two-level modes; labels group bit strings by particle count.

        Within one count, the internal index ranks the bit strings in
        binary-ascending order (most significant bit first), which matches
        the iterated tensor product of single-mode sites.
        """
        by_weight = {}
        for bits in range(2**k):
            by_weight.setdefault(bin(bits).count("1"), []).append(bits)
        labels = []
        for w in sorted(by_weight):
            for rank, _ in enumerate(sorted(by_weight[w])):
                labels.append((w, rank))
        return cls(labels)


def modes_bitstring_to_label(k: int):
    """Map a binary-ascending bit string (as int) to its modes(k) label."""
    table = {}
    counters = {}
    for bits in range(2**k):
        w = bin(bits).count("1")
        table[bits] = (w, counters.get(w, 0))
        counters[w] = counters.get(w, 0) + 1
    return table


# ---------------------------------------------------------------------------
# Sectored pure states


class SectoredPureState:
    """Bipartite pure state with fixed total particle number ``N``.

    ``sectors[n]`` holds the (generally unnormalized) amplitude matrix of the
    component where Alice carries ``n`` particles and Bob ``N - n``; entry
    ``[i, j]`` multiplies ``|n, i>_A |N-n, j>_B``.  Only non-empty sectors are
    stored.  Instances are treated as immutable.
    """

    def __init__(self, total: int, sectors):
        if total < 0:
            raise ValueError("total particle number must be non-negative")
        clean = {}
        for n, mat in sectors.items():
            n = int(n)
            if not 0 <= n <= total:
                raise SectorOutOfRange(f"sector {n} outside 0..{total}")
            mat = np.asarray(mat, dtype=complex)
            if mat.ndim != 2:
                raise ValueError("sector amplitude blocks must be matrices")
            clean[n] = mat
        self.total = int(total)
        self.sectors = clean

    # -- norms and weights ------------------------------------------------

    def norm_squared(self) -> float:
        return float(sum(np.sum(np.abs(m) ** 2) for m in self.sectors.values()))

    def normalized(self) -> "SectoredPureState":
        nrm = np.sqrt(self.norm_squared())
        if nrm < 1e-300:
            raise ZeroVector("cannot normalize a zero state")
        return SectoredPureState(
            self.total, {n: m / nrm for n, m in self.sectors.items()}
        )

    def sector_weight(self, n: int) -> float:
        m = self.sectors.get(n)
        return 0.0 if m is None else float(np.sum(np.abs(m) ** 2))

    def alice_distribution(self) -> dict:
        """Map from Alice's particle count to its probability weight."""
        return {n: self.sector_weight(n) for n in sorted(self.sectors)}

    def bob_distribution(self) -> dict:
        return {self.total - n: w for n, w in self.alice_distribution().items()}

    # -- Schmidt structure -------------------------------------------------

    def schmidt_sector(self, n: int):
        """Descending squared Schmidt coefficients of the sector-``n`` block.

        The weights are unnormalized; over a normalized state they sum to 1
        across all sectors.  An empty sector yields an empty list.
        """
        if not 0 <= n <= self.total:
            raise SectorOutOfRange(f"sector {n} outside 0..{self.total}")
        m = self.sectors.get(n)
        this = [] if m is None else np.linalg.svd(m, compute_uv=False) ** 2
        return sorted((float(x) for x in this), reverse=True)

    def ssr_schmidt(self) -> dict:
        """Per-sector unnormalized Schmidt weights for all sectors 0..N."""
        return {n: self.schmidt_sector(n) for n in range(self.total + 1)}

    def pooled_schmidt(self):
        out = []
        for n in self.sectors:
            out.extend(self.schmidt_sector(n))
        return sorted(out, reverse=True)

    # -- algebra -----------------------------------------------------------

    def tensor(self, other: "SectoredPureState") -> "SectoredPureState":
        """Tensor product where each party holds both subsystems.

        Combined internal indices enumerate splits ``(n1, n2)`` of the new
        local count in ascending ``n1``, scanning the first factor's internal
        index fastest-last (row-major), consistent with
        :meth:`LocalSpace.modes`.
        """
        total = self.total + other.total
        row_layout = {}
        col_layout = {}
        for n1, m1 in sorted(self.sectors.items()):
            for n2, m2 in sorted(other.sectors.items()):
                n = n1 + n2
                row_layout.setdefault(n, []).append((n1, n2, m1.shape[0] * m2.shape[0]))
                col_layout.setdefault(n, []).append((n1, n2, m1.shape[1] * m2.shape[1]))
        sectors = {}
        for n in row_layout:
            rows = sum(r for _, _, r in row_layout[n])
            cols = sum(c for _, _, c in col_layout[n])
            block = np.zeros((rows, cols), dtype=complex)
            r0 = 0
            for n1, n2, rsize in row_layout[n]:
                c0 = 0
                for m1_, m2_, csize in col_layout[n]:
                    if (m1_, m2_) == (n1, n2):
                        block[r0 : r0 + rsize, c0 : c0 + csize] = np.kron(
                            self.sectors[n1], other.sectors[n2]
                        )
                    c0 += csize
                r0 += rsize
            sectors[n] = block
        return SectoredPureState(total, sectors)

    def overlap(self, other: "SectoredPureState") -> complex:
        if self.total != other.total:
            return 0.0
        acc = 0.0 + 0.0j
        for n, m in self.sectors.items():
            o = other.sectors.get(n)
            if o is None:
                continue
            if o.shape != m.shape:
                raise DimensionMismatch("sector shapes differ; states live on different spaces")
            acc += np.vdot(m, o)
        return complex(acc)

    def to_block_density(self) -> "BlockDensityMatrix":
        pairs = []
        amps = []
        for n in sorted(self.sectors):
            m = self.sectors[n]
            for i in range(m.shape[0]):
                for j in range(m.shape[1]):
                    pairs.append(((n, i), (self.total - n, j)))
                    amps.append(m[i, j])
        vec = np.array(amps, dtype=complex)
        return BlockDensityMatrix(
            {self.total: np.outer(vec, vec.conj())}, {self.total: pairs}
        )


def make_pure(amplitudes) -> SectoredPureState:
    """Build a normalized sectored pure state from labelled amplitudes.

    ``amplitudes`` is an iterable of ``(alice_label, bob_label, value)``
    where a bare integer label means the non-degenerate ``(n, 0)``.  All
    entries must share one total particle number; raises
    :class:`MixedTotalNumber` otherwise and :class:`ZeroVector` if every
    amplitude vanishes.
    """
    entries = [(_as_label(a), _as_label(b), complex(v)) for a, b, v in amplitudes]
    if not entries:
        raise ZeroVector("no amplitudes given")
    totals = {a[0] + b[0] for a, b, _ in entries}
    if len(totals) != 1:
        raise MixedTotalNumber(f"amplitudes span total particle numbers {sorted(totals)}")
    total = totals.pop()
    dims_a = {}
    dims_b = {}
    for a, b, _ in entries:
        n = a[0]
        dims_a[n] = max(dims_a.get(n, 0), a[1] + 1)
        dims_b[n] = max(dims_b.get(n, 0), b[1] + 1)
    sectors = {
        n: np.zeros((dims_a[n], dims_b[n]), dtype=complex) for n in dims_a
    }
    for a, b, v in entries:
        sectors[a[0]][a[1], b[1]] += v
    state = SectoredPureState(total, sectors)
    if state.norm_squared() < 1e-28:
        raise ZeroVector("all amplitudes vanish")
    return state.normalized()


def v_epr() -> SectoredPureState:
    """(|0>|1> + |1>|0>)/sqrt(2): maximally entangled, unit number variance."""
    return make_pure([(0, 1, 1.0), (1, 0, 1.0)])


def e_epr() -> SectoredPureState:
    """(|01>|10> + |10>|01>)/sqrt(2): maximally entangled at constant local count."""
    return make_pure([((1, 0), (1, 1), 1.0), ((1, 1), (1, 0), 1.0)])


# ---------------------------------------------------------------------------
# General (cross-sector) pure states

@dataclass
class GeneralPureState:
    """Bipartite pure state without a fixed total particle number.

    Only the particle count of each local basis index matters here, so the
    local bases are described by ``alice_levels`` / ``bob_levels``.  Used for
    states prior to a total-number measurement.
    """

    matrix: np.ndarray
    alice_levels: tuple
    bob_levels: tuple

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        self.alice_levels = tuple(int(x) for x in self.alice_levels)
        self.bob_levels = tuple(int(x) for x in self.bob_levels)
        if self.matrix.shape != (len(self.alice_levels), len(self.bob_levels)):
            raise DimensionMismatch("amplitude matrix does not match level lists")

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.matrix) ** 2))

    def normalized(self) -> "GeneralPureState":
        nrm = np.sqrt(self.norm_squared())
        if nrm < 1e-300:
            raise ZeroVector("cannot normalize a zero state")
        return GeneralPureState(self.matrix / nrm, self.alice_levels, self.bob_levels)

    def max_total(self) -> int:
        return max(self.alice_levels) + max(self.bob_levels)

    def total_mask(self, total: int) -> np.ndarray:
        a = np.array(self.alice_levels)[:, None]
        b = np.array(self.bob_levels)[None, :]
        return (a + b) == total

    def project_total(self, total: int) -> "GeneralPureState":
        """Apply the projector onto the fixed-total-``total`` subspace (unnormalized)."""
        return GeneralPureState(
            np.where(self.total_mask(total), self.matrix, 0.0),
            self.alice_levels,
            self.bob_levels,
        )

    def entanglement_entropy(self) -> float:
        """Entropy of entanglement in bits (von Neumann entropy of either side)."""
        s = np.linalg.svd(self.matrix, compute_uv=False) ** 2
        nrm = s.sum()
        if nrm <= 0:
            raise ZeroVector("entanglement of the zero vector is undefined")
        s = s / nrm
        s = s[s > 1e-18]
        return float(-np.sum(s * np.log2(s)))


def general_from_sectored(state: SectoredPureState) -> GeneralPureState:
    """Embed a fixed-total pure state as a dense labelled matrix."""
    alice = []
    bob = []
    for n in sorted(state.sectors):
        m = state.sectors[n]
        alice.extend((n, i) for i in range(m.shape[0]))
        bob.extend((state.total - n, j) for j in range(m.shape[1]))
    bob = sorted(set(bob))
    a_index = {l: k for k, l in enumerate(alice)}
    b_index = {l: k for k, l in enumerate(bob)}
    mat = np.zeros((len(alice), len(bob)), dtype=complex)
    for n in sorted(state.sectors):
        m = state.sectors[n]
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                mat[a_index[(n, i)], b_index[(state.total - n, j)]] = m[i, j]
    return GeneralPureState(
        mat, tuple(l[0] for l in alice), tuple(l[0] for l in bob)
    )


# ---------------------------------------------------------------------------
# Block density matrices


class BlockDensityMatrix:
    """Density operator block-diagonal in the total particle number.

    ``blocks[T]`` is the Hermitian matrix of the total-``T`` component and
    ``basis[T]`` the list of ``(alice_label, bob_label)`` pairs indexing it.
    Within a block every pair satisfies ``level_A + level_B == T``.
    """

    def __init__(self, blocks, basis, validate: bool = True):
        self.blocks = {}
        self.basis = {}
        for t in blocks:
            mat = np.asarray(blocks[t], dtype=complex)
            pairs = [(_as_label(a), _as_label(b)) for a, b in basis[t]]
            if mat.shape != (len(pairs), len(pairs)):
                raise DimensionMismatch("block size does not match its basis")
            if validate:
                for a, b in pairs:
                    if a[0] + b[0] != t:
                        raise DimensionMismatch(
                            f"pair {(a, b)} does not carry total particle number {t}"
                        )
                if np.max(np.abs(mat - mat.conj().T), initial=0.0) > 1e-10:
                    raise ValueError("block is not Hermitian")
            self.blocks[int(t)] = mat
            self.basis[int(t)] = pairs

    def trace(self) -> float:
        return float(sum(np.trace(m).real for m in self.blocks.values()))

    def normalized(self) -> "BlockDensityMatrix":
        tr = self.trace()
        if tr < 1e-300:
            raise ZeroVector("cannot normalize a zero operator")
        return BlockDensityMatrix(
            {t: m / tr for t, m in self.blocks.items()}, self.basis, validate=False
        )

    def min_eigenvalue(self) -> float:
        vals = [np.linalg.eigvalsh(m).min() for m in self.blocks.values() if m.size]
        return float(min(vals)) if vals else 0.0

    def entry(self, alice_label, bob_label, alice_label2, bob_label2) -> complex:
        """Matrix element <a b| rho |a' b'>; zero when outside all blocks."""
        a, b = _as_label(alice_label), _as_label(bob_label)
        a2, b2 = _as_label(alice_label2), _as_label(bob_label2)
        t = a[0] + b[0]
        if a2[0] + b2[0] != t or t not in self.blocks:
            return 0.0
        pairs = self.basis[t]
        try:
            i = pairs.index((a, b))
            j = pairs.index((a2, b2))
        except ValueError:
            return 0.0
        return complex(self.blocks[t][i, j])

    # -- canonical form and comparison --------------------------------------

    def canonical(self) -> "BlockDensityMatrix":
        """Sort every block basis lexicographically and drop empty blocks."""
        blocks, basis = {}, {}
        for t, pairs in self.basis.items():
            order = sorted(range(len(pairs)), key=lambda k: pairs[k])
            perm = np.array(order, dtype=int)
            mat = self.blocks[t][np.ix_(perm, perm)]
            if mat.size == 0 or np.max(np.abs(mat)) < 1e-300:
                continue
            blocks[t] = mat
            basis[t] = [pairs[k] for k in order]
        return BlockDensityMatrix(blocks, basis, validate=False)

    def max_abs_diff(self, other: "BlockDensityMatrix") -> float:
        """Largest entrywise deviation on the union of the two supports."""
        worst = 0.0
        totals = set(self.blocks) | set(other.blocks)
        for t in totals:
            pairs = sorted(
                set(self.basis.get(t, [])) | set(other.basis.get(t, []))
            )
            d = len(pairs)
            a = _embed_block(self, t, pairs, d)
            b = _embed_block(other, t, pairs, d)
            if d:
                worst = max(worst, float(np.max(np.abs(a - b))))
        return worst

    # -- channels -----------------------------------------------------------

    def dephase(self) -> "BlockDensityMatrix":
        """Project onto joint local-particle-number eigenspaces.

        Entries between pairs with different Alice counts are erased; the map
        is idempotent and trace preserving.
        """
        out = {}
        for t, pairs in self.basis.items():
            levels_a = np.array([a[0] for a, _ in pairs])
            keep = levels_a[:, None] == levels_a[None, :]
            out[t] = np.where(keep, self.blocks[t], 0.0)
        return BlockDensityMatrix(out, self.basis, validate=False)

    def partial_trace(self, keep: str = "A") -> "ReducedDensity":
        """Trace out one party; the result is block-diagonal in the local count."""
        if keep not in ("A", "B"):
            raise ValueError("keep must be 'A' or 'B'")
        labels = sorted(
            {
                (pair[0] if keep == "A" else pair[1])
                for pairs in self.basis.values()
                for pair in pairs
            }
        )
        index = {l: k for k, l in enumerate(labels)}
        mat = np.zeros((len(labels), len(labels)), dtype=complex)
        for t, pairs in self.basis.items():
            block = self.blocks[t]
            for i, (ai, bi) in enumerate(pairs):
                for j, (aj, bj) in enumerate(pairs):
                    if keep == "A" and bi == bj:
                        mat[index[ai], index[aj]] += block[i, j]
                    elif keep == "B" and ai == aj:
                        mat[index[bi], index[bj]] += block[i, j]
        return ReducedDensity(tuple(labels), mat)


def _embed_block(rho: BlockDensityMatrix, t: int, pairs, d: int) -> np.ndarray:
    out = np.zeros((d, d), dtype=complex)
    if t not in rho.blocks:
        return out
    src = rho.basis[t]
    pos = {p: k for k, p in enumerate(pairs)}
    idx = np.array([pos[p] for p in src], dtype=int)
    out[np.ix_(idx, idx)] = rho.blocks[t]
    return out


@dataclass
class ReducedDensity:
    """Single-party density matrix with its label list."""

    labels: tuple
    matrix: np.ndarray

    def probabilities_by_level(self) -> dict:
        out = {}
        for k, (n, _) in enumerate(self.labels):
            out[n] = out.get(n, 0.0) + float(self.matrix[k, k].real)
        return out

    def entropy(self) -> float:
        vals = np.linalg.eigvalsh(self.matrix)
        vals = np.clip(vals.real, 0.0, None)
        vals = vals[vals > 1e-18]
        return float(-np.sum(vals * np.log2(vals)))


def mixture(components) -> BlockDensityMatrix:
    """Probability mixture of pure states as a block density matrix."""
    acc_blocks = {}
    acc_basis = {}
    for prob, state in components:
        rho = state.to_block_density()
        for t, pairs in rho.basis.items():
            if t not in acc_basis:
                acc_basis[t] = list(pairs)
                acc_blocks[t] = prob * rho.blocks[t]
                continue
            union = sorted(set(acc_basis[t]) | set(pairs))
            d = len(union)
            cur = BlockDensityMatrix(
                {t: acc_blocks[t]}, {t: acc_basis[t]}, validate=False
            )
            new = BlockDensityMatrix({t: rho.blocks[t]}, {t: pairs}, validate=False)
            acc_blocks[t] = _embed_block(cur, t, union, d) + prob * _embed_block(
                new, t, union, d
            )
            acc_basis[t] = union
    return BlockDensityMatrix(acc_blocks, acc_basis, validate=False)


# ---------------------------------------------------------------------------
# Local operators and Kraus sets


class LocalOperator:
    """One party's operator mapping a local space into another.

    Every non-zero entry must connect an input level ``n`` to the output
    level ``n + shift``; ``shift = 0`` is the strictly block-diagonal case.
    """

    def __init__(self, space_in: LocalSpace, matrix, shift: int = 0, space_out=None):
        self.space_in = space_in
        self.space_out = space_out if space_out is not None else space_in
        self.shift = int(shift)
        self.matrix = np.asarray(matrix, dtype=complex)
        if self.matrix.shape != (self.space_out.dim, self.space_in.dim):
            raise DimensionMismatch("operator matrix does not match its spaces")
        for r in range(self.space_out.dim):
            for c in range(self.space_in.dim):
                if abs(self.matrix[r, c]) > ATOL:
                    lv_out = self.space_out.labels[r][0]
                    lv_in = self.space_in.labels[c][0]
                    if lv_out != lv_in + self.shift:
                        raise DimensionMismatch(
                            f"entry ({r},{c}) connects level {lv_in} to {lv_out}, "
                            f"expected shift {self.shift}"
                        )

    def level_block(self, n: int) -> np.ndarray:
        """Sub-matrix mapping input level ``n`` to output level ``n + shift``."""
        rows = self.space_out.indices_at_level(n + self.shift)
        cols = self.space_in.indices_at_level(n)
        if rows.size == 0:
            return np.zeros((0, cols.size), dtype=complex)
        return self.matrix[np.ix_(rows, cols)]


class LocalKrausSet:
    """A complete set of local Kraus operators compatible with the number rule."""

    def __init__(self, operators, require_complete: bool = True, atol: float = 1e-10):
        operators = list(operators)
        if not operators:
            raise ValueError("empty Kraus set")
        space = operators[0].space_in
        for op in operators:
            if op.space_in is not space and op.space_in.labels != space.labels:
                raise DimensionMismatch("Kraus operators act on different input spaces")
        self.operators = operators
        self.space_in = space
        if require_complete:
            s = sum(op.matrix.conj().T @ op.matrix for op in operators)
            if np.max(np.abs(s - np.eye(space.dim))) > atol:
                raise ValueError("Kraus completeness sum differs from the identity")

    def __len__(self):
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)


def identity_kraus(space: LocalSpace) -> LocalKrausSet:
    return LocalKrausSet([LocalOperator(space, np.eye(space.dim))])


def number_projectors(space: LocalSpace) -> LocalKrausSet:
    """Projective measurement of the local particle count."""
    ops = []
    for n in space.levels:
        mat = np.zeros((space.dim, space.dim))
        for i in space.indices_at_level(n):
            mat[i, i] = 1.0
        ops.append(LocalOperator(space, mat))
    return LocalKrausSet(ops)


def subspace_projectors(space: LocalSpace, groups) -> LocalKrausSet:
    """Projectors onto the spans of the given label groups (plus the remainder)."""
    used = set()
    ops = []
    for group in groups:
        mat = np.zeros((space.dim, space.dim))
        for label in group:
            i = space.index(label)
            mat[i, i] = 1.0
            used.add(i)
        ops.append(LocalOperator(space, mat))
    rest = np.zeros((space.dim, space.dim))
    for i in range(space.dim):
        if i not in used:
            rest[i, i] = 1.0
    ops.append(LocalOperator(space, rest))
    return LocalKrausSet(ops)


# ---------------------------------------------------------------------------
# Applying local operations


def apply_operator_to_pure(
    state: SectoredPureState,
    alice: LocalOperator | None = None,
    bob: LocalOperator | None = None,
):
    """Apply single Kraus elements ``A (x) B`` to a pure state (unnormalized)."""
    shift_a = alice.shift if alice is not None else 0
    shift_b = bob.shift if bob is not None else 0
    total = state.total + shift_a + shift_b
    sectors = {}
    for n, m in state.sectors.items():
        a_block = alice.level_block(n) if alice is not None else np.eye(m.shape[0])
        b_block = (
            bob.level_block(state.total - n) if bob is not None else np.eye(m.shape[1])
        )
        # a state may use only the first few internal labels of a level
        if a_block.shape[1] < m.shape[0] or b_block.shape[1] < m.shape[1]:
            raise DimensionMismatch("operator blocks do not match sector dimensions")
        a_block = a_block[:, : m.shape[0]]
        b_block = b_block[:, : m.shape[1]]
        new = a_block @ m @ b_block.T
        if new.size and np.max(np.abs(new)) > 1e-300:
            key = n + shift_a
            if key in sectors:
                sectors[key] = sectors[key] + new
            else:
                sectors[key] = new
    if not sectors or total < 0:
        return None, 0.0
    out = SectoredPureState(total, sectors)
    prob = out.norm_squared()
    if prob < 1e-300:
        return None, 0.0
    return out, prob


def measure_pure(state: SectoredPureState, kraus: LocalKrausSet, party: str = "A"):
    """All measurement branches of a local Kraus set on a pure state.

    Returns a list of ``(probability, normalized_state)``; zero-probability
    branches are dropped.  Probabilities sum to one for a complete set on a
    normalized state.
    """
    out = []
    for op in kraus:
        if party == "A":
            branch, p = apply_operator_to_pure(state, alice=op)
        else:
            branch, p = apply_operator_to_pure(state, bob=op)
        if p > 1e-28:
            out.append((p, branch.normalized()))
    return out


def apply_local_kraus(
    rho: BlockDensityMatrix,
    alice: LocalKrausSet,
    bob: LocalKrausSet,
    select=None,
):
    """Apply a product Kraus channel ``{A_i (x) B_j}`` to a block density matrix.

    With ``select=(i, j)`` the normalized post-measurement state and its
    probability are returned; otherwise the deterministic channel output with
    probability 1.  The output stays block-diagonal in the total count.
    """
    if select is not None:
        i, j = select
        out = _conjugate(rho, alice.operators[i], bob.operators[j])
        p = out.trace()
        if p < 1e-14:
            raise ZeroProbabilityOutcome(f"outcome {select} has probability {p:.3e}")
        return out.normalized(), p
    acc = None
    for a_op in alice.operators:
        for b_op in bob.operators:
            term = _conjugate(rho, a_op, b_op)
            acc = term if acc is None else _add_block(acc, term)
    return acc, 1.0


def _conjugate(rho: BlockDensityMatrix, a_op: LocalOperator, b_op: LocalOperator):
    shift = a_op.shift + b_op.shift
    blocks = {}
    basis = {}
    for t, pairs in rho.basis.items():
        transfers = []
        out_pairs = {}
        rows = []
        for a, b in pairs:
            acol = a_op.space_in.index(a)
            bcol = b_op.space_in.index(b)
            col_a = a_op.matrix[:, acol]
            col_b = b_op.matrix[:, bcol]
            entries = {}
            for r_a in np.nonzero(np.abs(col_a) > 1e-300)[0]:
                for r_b in np.nonzero(np.abs(col_b) > 1e-300)[0]:
                    pair = (a_op.space_out.labels[r_a], b_op.space_out.labels[r_b])
                    entries[pair] = col_a[r_a] * col_b[r_b]
                    out_pairs.setdefault(pair, None)
            rows.append(entries)
        if not out_pairs:
            continue
        ordered = sorted(out_pairs)
        pos = {p: k for k, p in enumerate(ordered)}
        K = np.zeros((len(ordered), len(pairs)), dtype=complex)
        for c, entries in enumerate(rows):
            for pair, val in entries.items():
                K[pos[pair], c] = val
        new_block = K @ rho.blocks[t] @ K.conj().T
        t_out = t + shift
        if t_out in blocks:
            union = sorted(set(basis[t_out]) | set(ordered))
            cur = BlockDensityMatrix(
                {t_out: blocks[t_out]}, {t_out: basis[t_out]}, validate=False
            )
            new = BlockDensityMatrix({t_out: new_block}, {t_out: ordered}, validate=False)
            blocks[t_out] = _embed_block(cur, t_out, union, len(union)) + _embed_block(
                new, t_out, union, len(union)
            )
            basis[t_out] = union
        else:
            blocks[t_out] = new_block
            basis[t_out] = ordered
    return BlockDensityMatrix(blocks, basis, validate=False)


def _add_block(x: BlockDensityMatrix, y: BlockDensityMatrix) -> BlockDensityMatrix:
    blocks = {}
    basis = {}
    for t in set(x.blocks) | set(y.blocks):
        union = sorted(set(x.basis.get(t, [])) | set(y.basis.get(t, [])))
        d = len(union)
        blocks[t] = _embed_block(x, t, union, d) + _embed_block(y, t, union, d)
        basis[t] = union
    return BlockDensityMatrix(blocks, basis, validate=False)


def dephase(rho: BlockDensityMatrix) -> BlockDensityMatrix:
    """Erase coherences between different local-particle-number pairs."""
    return rho.dephase()


def partial_trace(rho: BlockDensityMatrix, keep: str = "A") -> ReducedDensity:
    return rho.partial_trace(keep)


# ---------------------------------------------------------------------------
# Random sampling

def random_pure_on(rng, space_a: LocalSpace, space_b: LocalSpace, total: int):
    """Rotation-invariant random pure state on the given spaces at fixed total.

    Complex Gaussian amplitudes are drawn sector by sector and the state is
    normalized globally.
    """
    sectors = {}
    for n in space_a.levels:
        da = space_a.level_dim(n)
        db = space_b.level_dim(total - n)
        if da == 0 or db == 0:
            continue
        sectors[n] = rng.standard_normal((da, db)) + 1j * rng.standard_normal((da, db))
    if not sectors:
        raise ValueError("no sector supports the requested total")
    return SectoredPureState(total, sectors).normalized()


def random_general(rng, alice_levels, bob_levels) -> GeneralPureState:
    """Random normalized state across total-number sectors."""
    m = rng.standard_normal((len(alice_levels), len(bob_levels)))
    m = m + 1j * rng.standard_normal(m.shape)
    return GeneralPureState(m, alice_levels, bob_levels).normalized()


def random_block_povm(rng, space: LocalSpace, n_outcomes: int, shifts=None):
    """Random complete Kraus set compatible with the number rule.

    ``shifts`` gives the particle-number shift of each outcome (default all
    zero).  Raw Gaussian blocks are whitened per input level so that the
    completeness sum is the identity.
    """
    if shifts is None:
        shifts = [0] * n_outcomes
    if len(shifts) != n_outcomes:
        raise ValueError("one shift per outcome required")
    raw = []
    for shift in shifts:
        mat = np.zeros((space.dim, space.dim), dtype=complex)
        for n in space.levels:
            rows = space.indices_at_level(n + shift)
            cols = space.indices_at_level(n)
            if rows.size == 0 or cols.size == 0:
                continue
            block = rng.standard_normal((rows.size, cols.size))
            block = block + 1j * rng.standard_normal(block.shape)
            mat[np.ix_(rows, cols)] = block
        raw.append((shift, mat))
    s = sum(m.conj().T @ m for _, m in raw)
    # whiten per level so the completeness relation holds exactly per sector
    whiten = np.zeros_like(s)
    for n in space.levels:
        cols = space.indices_at_level(n)
        sub = s[np.ix_(cols, cols)]
        vals, vecs = np.linalg.eigh(sub)
        if np.min(vals) < 1e-12:
            # re-draw is cheap; degenerate draws are measure zero
            return random_block_povm(rng, space, n_outcomes, shifts)
        inv_sqrt = vecs @ np.diag(vals ** -0.5) @ vecs.conj().T
        whiten[np.ix_(cols, cols)] = inv_sqrt
    ops = [
        LocalOperator(space, mat @ whiten, shift=shift) for shift, mat in raw
    ]
    return LocalKrausSet(ops)


# ---------------------------------------------------------------------------
# JSON wire format
#
# Pure states:
#   {"total_particles": N,
#    "amplitudes": [{"a": [n, i], "b": [m, j], "re": x, "im": y}, ...]}
# Density matrices:
#   {"blocks": [{"total_particles": T,
#                "basis": [{"a": [n, i], "b": [m, j]}, ...],
#                "re": [[...]], "im": [[...]]}, ...]}


def pure_to_json(state: SectoredPureState) -> str:
    amps = []
    for n in sorted(state.sectors):
        m = state.sectors[n]
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                v = m[i, j]
                if abs(v) == 0.0:
                    continue
                amps.append(
                    {
                        "a": [n, i],
                        "b": [state.total - n, j],
                        "re": v.real,
                        "im": v.imag,
                    }
                )
    return json.dumps(
        {"total_particles": state.total, "amplitudes": amps}, sort_keys=True
    )


def pure_from_json(text: str) -> SectoredPureState:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    try:
        total = int(doc["total_particles"])
        entries = [
            (tuple(rec["a"]), tuple(rec["b"]), rec["re"] + 1j * rec.get("im", 0.0))
            for rec in doc["amplitudes"]
        ]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"missing or malformed field: {exc}") from None
    state = make_pure(entries)
    if state.total != total:
        raise ParseError(
            f"declared total {total} disagrees with amplitudes (total {state.total})"
        )
    return state


def density_to_json(rho: BlockDensityMatrix) -> str:
    rho = rho.canonical()
    blocks = []
    for t in sorted(rho.blocks):
        blocks.append(
            {
                "total_particles": t,
                "basis": [{"a": list(a), "b": list(b)} for a, b in rho.basis[t]],
                "re": rho.blocks[t].real.tolist(),
                "im": rho.blocks[t].imag.tolist(),
            }
        )
    return json.dumps({"blocks": blocks}, sort_keys=True)


def density_from_json(text: str) -> BlockDensityMatrix:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    blocks = {}
    basis = {}
    try:
        for rec in doc["blocks"]:
            t = int(rec["total_particles"])
            pairs = [(tuple(p["a"]), tuple(p["b"])) for p in rec["basis"]]
            mat = np.array(rec["re"], dtype=float) + 1j * np.array(
                rec["im"], dtype=float
            )
            blocks[t] = mat
            basis[t] = pairs
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"missing or malformed field: {exc}") from None
    try:
        return BlockDensityMatrix(blocks, basis)
    except (DimensionMismatch, ValueError) as exc:
        raise ParseError(str(exc)) from None
