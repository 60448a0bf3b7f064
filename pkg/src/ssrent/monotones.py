"""Nonlocal monotones for number-superselected bipartite states.

Two quantities characterize a pure state here: the entropy of entanglement
(EoE, von Neumann entropy of the reduced state, in bits) and the
superselection-induced variance (SiV), four times the variance of one
party's particle count.  Both are non-increasing on average under
number-compatible LOCC; the qubit concurrence quantities for the
one-particle block of a two-qubit mixed state live here as well.

Logarithms are base 2 and ``0 log 0 = 0`` throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .fock import LocalKrausSet, SectoredPureState, measure_pure

if TYPE_CHECKING:  # pragma: no cover
    from .formation import QubitSSRState


def shannon_entropy(weights) -> float:
    """Entropy in bits of a probability vector; tiny negatives are clamped."""
    w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
    w = w[w > 1e-18]
    return float(-np.sum(w * np.log2(w)))


def binary_entropy(p: float) -> float:
    return shannon_entropy([p, 1.0 - p])


def ef_from_concurrence(c: float) -> float:
    """Formation entropy of a two-qubit state with concurrence ``c``."""
    c = min(max(float(c), 0.0), 1.0)
    return binary_entropy(0.5 + 0.5 * np.sqrt(1.0 - c * c))


def eoe(state: SectoredPureState) -> float:
    """Entropy of entanglement in bits.

    The reduced state is block-diagonal in Alice's particle count, so its
    spectrum is the pool of all per-sector unnormalized Schmidt weights.
    """
    return shannon_entropy(state.pooled_schmidt())


def siv(state: SectoredPureState, party: str = "A") -> float:
    """Superselection-induced variance: 4 Var of one party's particle count.

    Normalized so the unit-variance pair (|0>|1> + |1>|0>)/sqrt(2) scores 1;
    symmetric in the two parties because the total count is fixed.
    """
    dist = state.alice_distribution() if party == "A" else state.bob_distribution()
    total = sum(dist.values())
    mean = sum(n * w for n, w in dist.items()) / total
    second = sum(n * n * w for n, w in dist.items()) / total
    return float(4.0 * max(second - mean * mean, 0.0))


@dataclass(frozen=True)
class MonotonePair:
    """EoE (bits) and SiV of a state or outcome average."""

    eoe: float
    siv: float


def monotone_pair(state: SectoredPureState) -> MonotonePair:
    return MonotonePair(eoe(state), siv(state))


def concurrence(rho: "QubitSSRState") -> float:
    """Wootters concurrence of the two-qubit number-diagonal state.

    For diagonal weights ``w_ij`` and one-particle coherence ``gamma`` the
    closed form is ``max(0, 2 gamma - 2 sqrt(w00 w11))``.
    """
    return max(0.0, 2.0 * rho.gamma - 2.0 * np.sqrt(rho.w00 * rho.w11))


def wootters_concurrence(matrix: np.ndarray) -> float:
    """Spin-flip eigenvalue recipe on an arbitrary two-qubit density matrix."""
    rho = np.asarray(matrix, dtype=complex)
    yy = np.zeros((4, 4), dtype=complex)
    yy[0, 3], yy[1, 2], yy[2, 1], yy[3, 0] = -1.0, 1.0, 1.0, -1.0
    flipped = yy @ rho.conj() @ yy
    vals = np.linalg.eigvals(rho @ flipped)
    roots = np.sqrt(np.clip(vals.real, 0.0, None))
    roots.sort()
    return float(max(0.0, roots[-1] - roots[-3] - roots[-2] - roots[0]))


def ssr_concurrence(rho: "QubitSSRState"):
    """Weight ``p`` of the one-particle block and its internal concurrence.

    Returns ``(p, cbar)`` with ``cbar = 2 gamma / p`` (0 when the block is
    empty).  The unrestricted concurrence always satisfies
    ``p cbar - (1 - p) <= C <= p cbar``.
    """
    p = rho.w01 + rho.w10
    if p <= 0.0:
        return 0.0, 0.0
    return float(p), float(min(2.0 * rho.gamma / p, 1.0))


def monotonicity_trial(
    state: SectoredPureState, kraus: LocalKrausSet, party: str = "A"
):
    """Compare monotones before and after a local measurement.

    ``after`` averages EoE and SiV over the measurement branches weighted by
    their probabilities.  Both averages never exceed the input values for a
    number-compatible Kraus set (up to roundoff).
    """
    before = monotone_pair(state)
    branches = measure_pure(state, kraus, party=party)
    e_avg = sum(p * eoe(s) for p, s in branches)
    v_avg = sum(p * siv(s) for p, s in branches)
    return before, MonotonePair(float(e_avg), float(v_avg))
