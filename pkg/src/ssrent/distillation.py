"""Standard-form reduction and few-copy distillation protocols.

Any two-qubit number-diagonal state filters probabilistically into the
two-parameter family

    rho(v, w)  ~  diag(w, [1, v; v, 1], w) / (2 (1 + w)),

entangled exactly when ``v > w``.  Few-copy recurrence steps are local
two-row measurement operators acting on the tensored copies; every
closed-form ``(v, w)`` map here is cross-checked against brute-force
operator application.  The unit-variance extraction protocol consumes one
constant-count pair together with the extremal separable state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBlock, OutOfRange
from .fock import LocalSpace, apply_operator_to_pure, make_pure, subspace_projectors
from .formation import QubitSSRState
from .monotones import eoe, siv

_TINY = 1e-14


@dataclass(frozen=True)
class StandardForm:
    """Filtered normal form ``(v, w)`` with the filter success probability."""

    v: float
    w: float
    success_probability: float = 1.0

    def __post_init__(self):
        if self.v < -1e-12 or self.w < -1e-12:
            raise ValueError("v and w must be non-negative")
        if self.v > 1.0 + 1e-9:
            raise ValueError("v > 1 violates positivity of the one-particle block")

    @property
    def entangled(self) -> bool:
        return self.v > self.w

    def as_tuple(self):
        return (self.v, self.w)


def standard_form_state(v: float, w: float) -> QubitSSRState:
    """The normalized state of the ``(v, w)`` family."""
    norm = 2.0 * (1.0 + w)
    return QubitSSRState(w / norm, 1.0 / norm, 1.0 / norm, w / norm, v / norm)


def filters(rho: QubitSSRState):
    """Diagonal local filters carrying ``rho`` to its standard form.

    Entries are scaled so the largest is one (a valid measurement branch).
    Requires the one-particle diagonals to be positive and the 0- and
    2-particle weights to be either both positive or both zero; exact
    filtering into the family does not exist otherwise.
    """
    if rho.w01 * rho.w10 < _TINY:
        raise DegenerateBlock("one-particle block has a vanishing diagonal")
    if rho.w00 > _TINY and rho.w11 > _TINY:
        fa = np.array([(rho.w10 * rho.w11) ** 0.25, (rho.w00 * rho.w01) ** 0.25])
        fb = np.array([(rho.w01 * rho.w11) ** 0.25, (rho.w00 * rho.w10) ** 0.25])
    elif rho.w00 <= _TINY and rho.w11 <= _TINY:
        fa = np.array([rho.w10**0.25, rho.w01**0.25])
        fb = np.array([rho.w01**0.25, rho.w10**0.25])
    else:
        raise DegenerateBlock(
            "0- and 2-particle weights must be both positive or both zero "
            "for exact filtering"
        )
    return fa / fa.max(), fb / fb.max()


def apply_filters(rho: QubitSSRState, fa, fb):
    """Post-selected action of diagonal filters; returns (state, probability)."""
    scale = np.array(
        [
            fa[0] ** 2 * fb[0] ** 2,
            fa[0] ** 2 * fb[1] ** 2,
            fa[1] ** 2 * fb[0] ** 2,
            fa[1] ** 2 * fb[1] ** 2,
        ]
    )
    weights = np.array([rho.w00, rho.w01, rho.w10, rho.w11]) * scale
    gamma = rho.gamma * fa[0] * fb[1] * fa[1] * fb[0]
    prob = weights.sum()
    return (
        QubitSSRState(*(weights / prob), gamma / prob),
        float(prob),
    )


def standard_form(rho: QubitSSRState) -> StandardForm:
    """Reduce a two-qubit number-diagonal state to its ``(v, w)`` parameters.

    ``v = gamma / sqrt(w01 w10)`` and ``w = sqrt(w00 w11 / (w01 w10))``; the
    success probability is that of the explicit filter pair, and the reverse
    filters recover the input.
    """
    if rho.w01 * rho.w10 < _TINY:
        raise DegenerateBlock("one-particle block has a vanishing diagonal")
    v = rho.gamma / np.sqrt(rho.w01 * rho.w10)
    w = np.sqrt(rho.w00 * rho.w11 / (rho.w01 * rho.w10))
    fa, fb = filters(rho)
    _, prob = apply_filters(rho, fa, fb)
    return StandardForm(float(min(v, 1.0)), float(w), float(prob))


def reverse_filters(rho: QubitSSRState):
    """Filters carrying the standard form back to ``rho`` (scaled to max one)."""
    fa, fb = filters(rho)
    ra, rb = 1.0 / fa, 1.0 / fb
    return ra / ra.max(), rb / rb.max()


# ---------------------------------------------------------------------------
# Single-copy deterministic moves


def one_copy_moves(sf: StandardForm, mode: str, amount: float) -> StandardForm:
    """Deterministic single-copy reachability moves.

    ``increase_w`` admixes equal 0/2-particle weight, ``shrink_both``
    admixes the maximally mixed one-particle block, scaling ``v`` and ``w``
    by ``1 - amount``.  ``amount = 0`` is the identity for both modes.
    """
    if amount < 0:
        raise OutOfRange("amount must be non-negative")
    if mode == "increase_w":
        return StandardForm(sf.v, sf.w + amount, sf.success_probability)
    if mode == "shrink_both":
        if amount > 1.0:
            raise OutOfRange("shrink fraction cannot exceed 1")
        factor = 1.0 - amount
        return StandardForm(sf.v * factor, sf.w * factor, sf.success_probability)
    raise OutOfRange(f"unknown mode {mode!r}")


def one_copy_move_oracle(sf: StandardForm, mode: str, amount: float) -> StandardForm:
    """The same moves realized by explicit state mixing."""
    rho = standard_form_state(sf.v, sf.w)
    if mode == "increase_w":
        t = amount / (amount + 1.0 + sf.w)
        mixed = QubitSSRState(0.5, 0.0, 0.0, 0.5, 0.0).mix(rho, t)
    elif mode == "shrink_both":
        if not 0.0 <= amount < 1.0:
            raise OutOfRange("mixing realizes shrink fractions in [0, 1)")
        t = amount / (amount + (1.0 + sf.w) * (1.0 - amount))
        mixed = QubitSSRState(0.0, 0.5, 0.5, 0.0, 0.0).mix(rho, t)
    else:
        raise OutOfRange(f"unknown mode {mode!r}")
    return standard_form(mixed)


# ---------------------------------------------------------------------------
# Recurrence protocols


@dataclass(frozen=True)
class RecurrenceMap:
    """Few-copy protocol: local two-row operators plus the ``(v, w)`` map.

    The operator rows are indexed by the surviving qubit (0 then 1) over the
    ``2**arity``-dimensional copy basis in binary-ascending order; row ``r``
    must be supported on strings of one fixed particle count ``n_r`` with
    ``n_1 = n_0 + 1``.
    """

    name: str
    arity: int
    alice_op: tuple
    bob_op: tuple
    closed_form: callable

    def __post_init__(self):
        for op in (self.alice_op, self.bob_op):
            mat = np.asarray(op, dtype=float)
            if mat.shape != (2, 2**self.arity):
                raise ValueError("operators must be 2 x 2**arity")
            weights = []
            for row in mat:
                counts = {
                    bin(c).count("1")
                    for c in range(2**self.arity)
                    if abs(row[c]) > 0
                }
                if len(counts) != 1:
                    raise ValueError("each row must sit in one particle sector")
                weights.append(counts.pop())
            if weights[1] != weights[0] + 1:
                raise ValueError("rows must occupy adjacent particle sectors")

    def alice_matrix(self) -> np.ndarray:
        return np.asarray(self.alice_op, dtype=float)

    def bob_matrix(self) -> np.ndarray:
        return np.asarray(self.bob_op, dtype=float)


def _two_copy_a(v, w):
    return v, np.sqrt((1.0 + v * v + w * w) / 2.0)


def _two_copy_b(v, w):
    scale = np.sqrt(2.0 / (1.0 + v * v + w * w))
    return scale * v, scale * w


def _three_copy_separable(v, w):
    den = 1.0 + 2.0 * v * v + 2.0 * w * w
    return v + (v - v**3) / den, w * (2.0 + 2.0 * v * v + w * w) / den


def _three_copy_entangled(v, w):
    den = 3.0 + 6.0 * v * v + 6.0 * w * w
    return (
        v * (6.0 + 3.0 * v * v - 2.0 * w * w) / den,
        w * (6.0 - 2.0 * v * v + 3.0 * w * w) / den,
    )


TWO_COPY_A = RecurrenceMap(
    "two_copy_a",
    2,
    ((1, 0, 0, 0), (0, 1, 1, 0)),
    ((1, 0, 0, 0), (0, 1, 1, 0)),
    _two_copy_a,
)
TWO_COPY_B = RecurrenceMap(
    "two_copy_b",
    2,
    ((1, 0, 0, 0), (0, 1, 1, 0)),
    ((0, 1, 1, 0), (0, 0, 0, 1)),
    _two_copy_b,
)
THREE_COPY_SEPARABLE = RecurrenceMap(
    "three_copy_separable",
    3,
    ((0, 1, 1, 0, 1, 0, 0, 0), (0, 0, 0, 1, 0, 1, 1, 0)),
    ((0, 1, 1, 0, 1, 0, 0, 0), (0, 0, 0, 1, 0, 1, 1, 0)),
    _three_copy_separable,
)
THREE_COPY_ENTANGLED = RecurrenceMap(
    "three_copy_entangled",
    3,
    ((0, 1, 1, 0, -1, 0, 0, 0), (0, 0, 0, 1, 0, 1, 1, 0)),
    ((0, 1, 1, 0, 1, 0, 0, 0), (0, 0, 0, -1, 0, 1, 1, 0)),
    _three_copy_entangled,
)

RECURRENCE_MAPS = {
    m.name: m
    for m in (TWO_COPY_A, TWO_COPY_B, THREE_COPY_SEPARABLE, THREE_COPY_ENTANGLED)
}


def two_copy_map(sf: StandardForm, variant: str) -> StandardForm:
    """Closed-form two-copy recurrence step (variants ``a`` and ``b``)."""
    fn = {"a": _two_copy_a, "b": _two_copy_b}.get(variant)
    if fn is None:
        raise OutOfRange(f"unknown two-copy variant {variant!r}")
    v, w = fn(sf.v, sf.w)
    return StandardForm(float(min(v, 1.0)), float(w))


def three_copy_map(sf: StandardForm, variant: str) -> StandardForm:
    """Closed-form three-copy recurrence step."""
    fn = {
        "separable": _three_copy_separable,
        "entangled": _three_copy_entangled,
    }.get(variant)
    if fn is None:
        raise OutOfRange(f"unknown three-copy variant {variant!r}")
    v, w = fn(sf.v, sf.w)
    return StandardForm(float(min(v, 1.0)), float(w))


def _copies_matrix(rho4: np.ndarray, copies: int) -> np.ndarray:
    """Regroup ``rho^(x copies)`` so all Alice bits precede all Bob bits."""
    full = rho4
    for _ in range(copies - 1):
        full = np.kron(full, rho4)
    axes = 2 * copies
    t = full.reshape([2] * (2 * axes))
    alice = list(range(0, axes, 2))
    bob = list(range(1, axes, 2))
    perm = alice + bob + [axes + p for p in alice + bob]
    t = t.transpose(perm)
    d = 2**copies
    return t.reshape(d * d, d * d)


def recurrence_oracle(sf: StandardForm, rmap: RecurrenceMap):
    """Brute-force application of a recurrence protocol.

    Tensors the copies, applies the (singular-value-normalized) local
    operators to all Alice and all Bob copies, and re-derives the standard
    form of the surviving pair.  Returns ``(StandardForm, probability)``.
    Raises :class:`DegenerateBlock` where the surviving one-particle block is
    empty (the closed-form value there is the continuous limit).
    """
    rho4 = standard_form_state(sf.v, sf.w).matrix()
    big = _copies_matrix(rho4, rmap.arity)
    ma = rmap.alice_matrix()
    mb = rmap.bob_matrix()
    ma = ma / np.linalg.svd(ma, compute_uv=False).max()
    mb = mb / np.linalg.svd(mb, compute_uv=False).max()
    k = np.kron(ma, mb)
    out = k @ big @ k.conj().T
    prob = float(np.trace(out).real)
    if prob < 1e-300:
        raise DegenerateBlock("protocol branch has zero probability")
    reduced = QubitSSRState.from_matrix(out / prob)
    return standard_form(reduced), prob


def iterate_map(sf: StandardForm, variant: str, max_steps: int = 1000, tol: float = 1e-9):
    """Iterate a three-copy map until the parameters stop moving."""
    cur = sf
    for step in range(max_steps):
        nxt = three_copy_map(cur, variant)
        if abs(nxt.v - cur.v) < tol and abs(nxt.w - cur.w) < tol:
            return nxt, step + 1
        cur = nxt
    return cur, max_steps


# ---------------------------------------------------------------------------
# Entanglement distillation by one-particle projection


def distill_entanglement_projection(sf: StandardForm) -> np.ndarray:
    """Two copies projected locally onto the one-particle subspaces.

    The surviving pair lives in the constant-count qubit encoding
    ``|0> = |01>, |1> = |10>`` per party; in that 4-dimensional basis the
    normalized output is ``[w^2, [1, v^2; v^2, 1], w^2] / (2 (1 + w^2))``,
    entangled exactly when the input is.
    """
    v2, w2 = sf.v**2, sf.w**2
    m = np.diag([w2, 1.0, 1.0, w2]).astype(complex)
    m[1, 2] = m[2, 1] = v2
    return m / (2.0 * (1.0 + w2))


def distill_entanglement_projection_oracle(sf: StandardForm) -> np.ndarray:
    """The same projection computed on the tensored copies."""
    rho4 = standard_form_state(sf.v, sf.w).matrix()
    big = _copies_matrix(rho4, 2)
    # per party keep the strings 01 (index 1) and 10 (index 2)
    p = np.zeros((2, 4))
    p[0, 1] = 1.0
    p[1, 2] = 1.0
    k = np.kron(p, p)
    out = k @ big @ k.T
    return out / np.trace(out).real


# ---------------------------------------------------------------------------
# Extracting the unit-variance pair from the separable standard state


def _extraction_components():
    """The three fixed-total components of (constant-count pair) x rho_sep.

    Each party holds three modes; the first two carry the constant-count
    maximally entangled pair, the third the separable state's qubit.  In the
    three-mode labelling, |010> = (1, 1), |100> = (1, 2), |011> = (2, 0),
    |101> = (2, 1).  The mixture weights are 1/4, 1/2, 1/4.
    """
    psi0 = make_pure([((1, 1), (1, 2), 1.0), ((1, 2), (1, 1), 1.0)])
    psi1 = make_pure(
        [
            ((1, 1), (2, 1), 1.0),
            ((1, 2), (2, 0), 1.0),
            ((2, 0), (1, 2), 1.0),
            ((2, 1), (1, 1), 1.0),
        ]
    )
    psi2 = make_pure([((2, 0), (2, 1), 1.0), ((2, 1), (2, 0), 1.0)])
    return [(0.25, psi0), (0.5, psi1), (0.25, psi2)]


def _extraction_measurement():
    """Bilateral projections onto span{|010>, |101>} and span{|100>, |011>}."""
    space = LocalSpace.modes(3)
    groups = [[(1, 1), (2, 1)], [(1, 2), (2, 0)]]
    return subspace_projectors(space, groups)


@dataclass(frozen=True)
class ExtractionBranch:
    probability: float
    matched: bool
    eoe: float
    siv: float


@dataclass(frozen=True)
class ExtractionAnalysis:
    """Exact branch bookkeeping of the extraction protocol."""

    branches: tuple
    success_probability: float
    siv_yield: float
    residual_entanglement: float

    @property
    def success_eoe(self) -> float:
        return max(b.eoe for b in self.branches if b.matched)

    @property
    def success_siv(self) -> float:
        return max(b.siv for b in self.branches if b.matched)


def extract_vepr_analysis() -> ExtractionAnalysis:
    """Exact simulation of the variance-extraction protocol.

    Both parties project onto the two designated two-dimensional subspaces;
    matching outcomes leave a known state with unit entanglement and unit
    variance (convertible into the unit-variance pair), mismatched outcomes
    leave products.  Success probability is exactly one half.
    """
    ops = _extraction_measurement().operators
    branches = []
    for weight, component in _extraction_components():
        for ia, op_a in enumerate(ops):
            after_a, p_a = apply_operator_to_pure(component, alice=op_a)
            if p_a < 1e-15:
                continue
            after_a = after_a.normalized()
            for ib, op_b in enumerate(ops):
                state, p_b = apply_operator_to_pure(after_a, bob=op_b)
                prob = weight * p_a * p_b
                if prob < 1e-15:
                    continue
                state = state.normalized()
                branches.append(
                    ExtractionBranch(
                        probability=prob,
                        matched=(ia == ib and ia < 2),
                        eoe=eoe(state),
                        siv=siv(state),
                    )
                )
    success = sum(b.probability for b in branches if b.matched)
    return ExtractionAnalysis(
        branches=tuple(branches),
        success_probability=float(success),
        siv_yield=float(sum(b.probability * b.siv for b in branches if b.matched)),
        residual_entanglement=float(
            sum(b.probability * b.eoe for b in branches)
        ),
    )


def extract_vepr(rounds: int, seed: int = 0):
    """Monte-Carlo average of the extraction yield over ``rounds`` runs.

    Returns ``(siv_yield, residual_entanglement)``; both converge to one
    half, the variance of formation of the separable standard state.
    """
    if rounds < 1:
        raise OutOfRange("at least one round required")
    analysis = extract_vepr_analysis()
    probs = np.array([b.probability for b in analysis.branches])
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(probs), size=rounds, p=probs / probs.sum())
    got_siv = np.array([analysis.branches[i].siv for i in picks])
    got_eoe = np.array([analysis.branches[i].eoe for i in picks])
    return float(got_siv.mean()), float(got_eoe.mean())
