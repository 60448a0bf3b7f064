"""Formation measures for mixed two-qubit states under the particle-number rule.

A number-diagonal two-qubit state is parametrized by the weights
``w00, w01, w10, w11`` and the one-particle coherence ``gamma`` (made real
non-negative by local phase rotations).  Formation quantities minimize the
average pure-state monotones over decompositions whose members carry a fixed
total particle number:

    ef_ssr = p * E(cbar),   vf_ssr = p * cbar**2,

with ``p = w01 + w10`` and ``cbar = 2 gamma / p``.  The unrestricted
(non-superselected) formation entropy E(C) is exposed for comparison and
backed by an explicit optimal decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import monotones
from .errors import NotDirectSumOfPure
from .fock import SectoredPureState, make_pure, mixture
from .monotones import ef_from_concurrence, shannon_entropy, siv, ssr_concurrence


class QubitSSRState:
    """Two-qubit density matrix commuting with both local particle counts.

    In the basis ``|00>, |01>, |10>, |11>`` the only off-diagonal entry is
    the one-particle coherence ``gamma``; a complex value is canonicalized to
    ``|gamma|`` on construction (a local phase rotation).
    """

    __slots__ = ("w00", "w01", "w10", "w11", "gamma")

    def __init__(self, w00, w01, w10, w11, gamma):
        weights = [float(w00), float(w01), float(w10), float(w11)]
        if min(weights) < -1e-12:
            raise ValueError("negative diagonal weight")
        weights = [max(w, 0.0) for w in weights]
        total = sum(weights)
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"weights sum to {total}, expected 1")
        g = abs(complex(gamma))
        bound = np.sqrt(weights[1] * weights[2])
        if g > bound + 1e-12:
            raise ValueError(
                f"coherence {g} exceeds the positivity bound sqrt(w01 w10) = {bound}"
            )
        self.w00, self.w01, self.w10, self.w11 = weights
        self.gamma = min(g, bound)

    def matrix(self) -> np.ndarray:
        m = np.diag([self.w00, self.w01, self.w10, self.w11]).astype(complex)
        m[1, 2] = self.gamma
        m[2, 1] = self.gamma
        return m

    @classmethod
    def from_matrix(cls, m, atol: float = 1e-10) -> "QubitSSRState":
        m = np.asarray(m, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("expected a 4x4 matrix")
        mask = np.zeros((4, 4), dtype=bool)
        mask[np.arange(4), np.arange(4)] = True
        mask[1, 2] = mask[2, 1] = True
        stray = np.max(np.abs(np.where(mask, 0.0, m)))
        if stray > atol * max(1.0, np.max(np.abs(m))):
            raise ValueError("matrix has entries outside the number-diagonal shape")
        tr = np.trace(m).real
        return cls(
            m[0, 0].real / tr,
            m[1, 1].real / tr,
            m[2, 2].real / tr,
            m[3, 3].real / tr,
            m[1, 2] / tr,
        )

    @classmethod
    def scaled(cls, w00, w01, w10, w11, gamma) -> "QubitSSRState":
        """Build from unnormalized weights, dividing by their sum."""
        total = float(w00) + float(w01) + float(w10) + float(w11)
        if total <= 0:
            raise ValueError("weights must have a positive sum")
        return cls(w00 / total, w01 / total, w10 / total, w11 / total, gamma / total)

    @classmethod
    def random(cls, rng) -> "QubitSSRState":
        w = rng.dirichlet([1.0, 1.0, 1.0, 1.0])
        g = rng.uniform(0.0, 1.0) * np.sqrt(w[1] * w[2])
        return cls(w[0], w[1], w[2], w[3], g)

    @classmethod
    def from_p_cbar(cls, p: float, cbar: float) -> "QubitSSRState":
        """Balanced representative with one-particle weight ``p`` and coherence ``cbar``."""
        if not (0.0 <= p <= 1.0 and 0.0 <= cbar <= 1.0):
            raise ValueError("p and cbar must lie in [0, 1]")
        return cls((1 - p) / 2, p / 2, p / 2, (1 - p) / 2, p * cbar / 2)

    def mix(self, other: "QubitSSRState", weight: float) -> "QubitSSRState":
        """Convex combination ``weight * self + (1 - weight) * other``."""
        lam = float(weight)
        return QubitSSRState(
            lam * self.w00 + (1 - lam) * other.w00,
            lam * self.w01 + (1 - lam) * other.w01,
            lam * self.w10 + (1 - lam) * other.w10,
            lam * self.w11 + (1 - lam) * other.w11,
            lam * self.gamma + (1 - lam) * other.gamma,
        )

    def to_block_density(self):
        return mixture(optimal_decomposition(self))

    def __repr__(self):
        return (
            f"QubitSSRState(w00={self.w00:.6g}, w01={self.w01:.6g}, "
            f"w10={self.w10:.6g}, w11={self.w11:.6g}, gamma={self.gamma:.6g})"
        )


def rho_sep() -> QubitSSRState:
    """The extremal separable-but-nonlocal two-qubit state.

    Equal weights 1/4 with one-particle coherence 1/4; also the uniform
    mixture of ``(|0> + w|1>)(|0> + w|1>)/2`` over the four fourth roots of
    unity, hence separable, yet no number-compatible decomposition is
    separable.
    """
    return QubitSSRState(0.25, 0.25, 0.25, 0.25, 0.25)


def rho_sep_phase_mixture() -> list:
    """The explicit separable four-state mixture reproducing ``rho_sep``."""
    out = []
    for omega in (1.0, 1.0j, -1.0, -1.0j):
        vec = np.array([1.0, omega, omega, omega**2], dtype=complex) / 2.0
        out.append((0.25, vec))
    return out


@dataclass(frozen=True)
class FormationPoint:
    """Formation data of a two-qubit number-diagonal state."""

    p: float
    cbar: float
    ef_ssr: float
    vf_ssr: float
    ef_unrestricted: float

    @property
    def separable_flag(self) -> bool:
        """Necessary separability condition ``cbar <= (1 - p) / p``."""
        if self.p <= 0.0:
            return True
        return self.cbar <= (1.0 - self.p) / self.p + 1e-12


def formation_point(rho: QubitSSRState) -> FormationPoint:
    """Exact formation measures of a two-qubit number-diagonal state.

    ``ef_ssr = p E(cbar)`` and ``vf_ssr = p cbar**2``; the unrestricted
    ``E(C)`` is returned alongside and never exceeds ``ef_ssr``.
    """
    p, cbar = ssr_concurrence(rho)
    c = monotones.concurrence(rho)
    return FormationPoint(
        p=p,
        cbar=cbar,
        ef_ssr=p * ef_from_concurrence(cbar),
        vf_ssr=p * cbar * cbar,
        ef_unrestricted=ef_from_concurrence(c),
    )


# ---------------------------------------------------------------------------
# Optimal decompositions


def optimal_decomposition(rho: QubitSSRState):
    """Number-compatible decomposition attaining both formation minima.

    The zero- and two-particle blocks appear as product terms.  The
    one-particle block is split between ``sqrt(s)|01> + sqrt(1-s)|10>`` and
    its mirror, where ``s`` is the root >= 1/2 of ``cbar/2 = sqrt(s(1-s))``;
    both members have formation entropy ``E(cbar)`` and variance ``cbar**2``.
    """
    out = []
    if rho.w00 > 1e-15:
        out.append((rho.w00, make_pure([(0, 0, 1.0)])))
    if rho.w11 > 1e-15:
        out.append((rho.w11, make_pure([(1, 1, 1.0)])))
    p, cbar = ssr_concurrence(rho)
    if p > 1e-15:
        if cbar < 1e-15:
            if rho.w01 > 1e-15:
                out.append((rho.w01, make_pure([(0, 1, 1.0)])))
            if rho.w10 > 1e-15:
                out.append((rho.w10, make_pure([(1, 0, 1.0)])))
        else:
            s = 0.5 + 0.5 * np.sqrt(max(1.0 - cbar * cbar, 0.0))
            if s - 0.5 > 1e-9:
                q1 = (rho.w01 - p * (1.0 - s)) / (2.0 * s - 1.0)
            else:
                q1 = p / 2.0
            q1 = min(max(q1, 0.0), p)
            q2 = p - q1
            chi1 = make_pure([(0, 1, np.sqrt(s)), (1, 0, np.sqrt(1 - s))])
            chi2 = make_pure([(0, 1, np.sqrt(1 - s)), (1, 0, np.sqrt(s))])
            if q1 > 1e-15:
                out.append((q1, chi1))
            if q2 > 1e-15:
                out.append((q2, chi2))
    return out


def optimal_unrestricted_decomposition(rho: QubitSSRState):
    """Decomposition attaining the unrestricted formation entropy ``E(C)``.

    Members generally superpose different total particle numbers.  Entangled
    states use the spin-flip construction (every member ends up with
    concurrence exactly ``C``); separable ones use a four-phase product
    family plus diagonal leftovers.  Returns ``(probability, vec4)`` pairs
    over the basis ``|00>, |01>, |10>, |11>``.
    """
    c = monotones.concurrence(rho)
    if c > 1e-12:
        return _entangled_optimal_decomposition(rho.matrix(), c)
    return _separable_decomposition(rho)


def _entangled_optimal_decomposition(m: np.ndarray, c: float):
    yy = np.zeros((4, 4))
    yy[0, 3], yy[1, 2], yy[2, 1], yy[3, 0] = -1.0, 1.0, 1.0, -1.0
    vals, vecs = np.linalg.eigh(m)
    keep = vals > 1e-13
    sub = [np.sqrt(v) * vecs[:, k].astype(complex) for k, v in enumerate(vals) if keep[k]]
    r = len(sub)
    if r == 1:
        p = float(np.vdot(sub[0], sub[0]).real)
        return [(p, sub[0] / np.sqrt(p))]
    # tau_ij = <v_i | flip(v_j)> is complex symmetric; diagonalize by a
    # unitary congruence built from its real eigensystem
    tau = np.array([[vi @ yy @ vj for vj in sub] for vi in sub])
    tau = (tau + tau.T) / 2.0
    d, o = np.linalg.eigh(tau.real)
    phase = np.where(d >= 0, 1.0, 1.0j)
    u = np.diag(phase) @ o.T
    lam = np.abs(d)
    order = np.argsort(lam)[::-1]
    u = u[order]
    lam = lam[order]
    x = [sum(u[i, j].conj() * sub[j] for j in range(r)) for i in range(r)]
    y = [x[0]] + [1.0j * xi for xi in x[1:]]
    dvec = np.array([lam[0]] + [-l for l in lam[1:]])
    gram = np.array([[np.vdot(yi, yj) for yj in y] for yi in y])
    w = np.diag(dvec) - c * gram.real
    v = _zero_diagonal_rotation(w)
    out = []
    for i in range(r):
        z = sum(v[i, j] * y[j] for j in range(r))
        p = float(np.vdot(z, z).real)
        if p > 1e-14:
            out.append((p, z / np.sqrt(p)))
    return out


def _zero_diagonal_rotation(w: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """Real orthogonal ``V`` with ``diag(V w V^T) = 0`` for traceless symmetric ``w``."""
    n = w.shape[0]
    v = np.eye(n)
    cur = w.copy()
    for _ in range(200):
        d = np.diag(cur)
        if np.max(np.abs(d)) < tol:
            break
        i = int(np.argmax(d))
        j = int(np.argmin(d))
        a, b, cc = cur[i, i], cur[j, j], cur[i, j]
        # rotate in the (i, j) plane so that entry i becomes zero:
        # a cos^2 + 2 cc sin cos + b sin^2 = 0
        if abs(b) > 1e-15:
            disc = max(cc * cc - a * b, 0.0)
            t = (-cc + np.sqrt(disc)) / b
            theta = np.arctan(t)
        elif abs(cc) > 1e-15:
            theta = np.arctan2(-a, 2 * cc)
        else:
            break
        rot = np.eye(n)
        rot[i, i] = rot[j, j] = np.cos(theta)
        rot[i, j] = np.sin(theta)
        rot[j, i] = -np.sin(theta)
        cur = rot @ cur @ rot.T
        v = rot @ v
    return v


def _separable_decomposition(rho: QubitSSRState):
    out = []
    diag = np.array([rho.w00, rho.w01, rho.w10, rho.w11])
    if rho.gamma > 1e-15:
        r = np.sqrt(rho.w00 * rho.w01 / (rho.w11 * rho.w10))
        s = np.sqrt(rho.w00 * rho.w10 / (rho.w11 * rho.w01))
        x = r / (1.0 + r)
        y = s / (1.0 + s)
        mu = rho.gamma / np.sqrt(x * (1 - x) * y * (1 - y))
        family_diag = mu * np.array(
            [x * y, x * (1 - y), (1 - x) * y, (1 - x) * (1 - y)]
        )
        diag = diag - family_diag
        if diag.min() < -1e-12:
            raise ValueError("separable construction failed; state looks entangled")
        diag = np.clip(diag, 0.0, None)
        a = np.array([np.sqrt(x), np.sqrt(1 - x)])
        b = np.array([np.sqrt(y), np.sqrt(1 - y)])
        for omega in (1.0, 1.0j, -1.0, -1.0j):
            vec = np.kron(a * np.array([1.0, omega]), b * np.array([1.0, omega]))
            out.append((mu / 4.0, vec.astype(complex)))
    basis = np.eye(4, dtype=complex)
    for k in range(4):
        if diag[k] > 1e-15:
            out.append((float(diag[k]), basis[k]))
    return out


def decomposition_matrix(decomposition) -> np.ndarray:
    """Reassemble ``sum p |v><v|`` from a vector decomposition."""
    m = np.zeros((4, 4), dtype=complex)
    for p, vec in decomposition:
        m += p * np.outer(vec, vec.conj())
    return m


# ---------------------------------------------------------------------------
# Additivity of the variance of formation on direct sums of pure states


def validate_direct_sum(parts) -> None:
    """Parts must be ``(weight, state)`` with distinct totals summing to one."""
    totals = [state.total for _, state in parts]
    if len(set(totals)) != len(totals):
        raise NotDirectSumOfPure("two blocks share a total particle number")
    weight = sum(w for w, _ in parts)
    if abs(weight - 1.0) > 1e-10:
        raise NotDirectSumOfPure(f"block weights sum to {weight}")
    for _, state in parts:
        if abs(state.norm_squared() - 1.0) > 1e-10:
            raise NotDirectSumOfPure("blocks must hold normalized pure states")


def direct_sum_vf(parts) -> float:
    """Variance of formation of a block-diagonal state with pure blocks."""
    validate_direct_sum(parts)
    return float(sum(w * siv(state) for w, state in parts))


def _distribution_array(state: SectoredPureState, size: int) -> np.ndarray:
    arr = np.zeros(size)
    for n, w in state.alice_distribution().items():
        arr[n] = w
    return arr


def _variance_of(arr: np.ndarray) -> float:
    n = np.arange(arr.size)
    total = arr.sum()
    mean = (n * arr).sum() / total
    return float(((n - mean) ** 2 * arr).sum() / total)


def vf_additivity_trial(rho_parts, sigma_parts, rng=None, samples: int = 60, max_terms: int = 8):
    """Probe additivity of the variance of formation on a tensor product.

    Both inputs are direct sums of pure states.  ``lhs`` is the lowest
    weighted variance found over random decompositions of the product
    (sampled blockwise through random isometries, the original product
    decomposition included); ``rhs`` is the sum of the two formation values.
    """
    validate_direct_sum(rho_parts)
    validate_direct_sum(sigma_parts)
    rng = np.random.default_rng(0) if rng is None else rng
    rhs = direct_sum_vf(rho_parts) + direct_sum_vf(sigma_parts)

    size = (
        max(s.total for _, s in rho_parts) + max(s.total for _, s in sigma_parts) + 1
    )
    blocks = {}
    for w1, chi in rho_parts:
        d1 = _distribution_array(chi, size)
        for w2, psi in sigma_parts:
            d2 = _distribution_array(psi, size)
            conv = np.convolve(d1, d2)[:size]
            total = chi.total + psi.total
            blocks.setdefault(total, []).append((w1 * w2, conv))

    lhs = 0.0
    for comps in blocks.values():
        weights = np.array([w for w, _ in comps])
        dists = np.stack([d for _, d in comps])
        k = len(comps)
        best = float(
            sum(w * 4.0 * _variance_of(d) for w, d in zip(weights, dists))
        )
        for _ in range(samples):
            terms = int(rng.integers(k, max_terms + 1))
            g = rng.standard_normal((terms, k)) + 1j * rng.standard_normal((terms, k))
            q, _ = np.linalg.qr(g)  # isometry: q has orthonormal columns
            u = q[:, :k] if q.shape[1] >= k else None
            if u is None:
                continue
            coeff2 = np.abs(u) ** 2 * weights[None, :]
            avg = 0.0
            for m in range(terms):
                wm = coeff2[m].sum()
                if wm < 1e-15:
                    continue
                mixed = (coeff2[m][:, None] * dists).sum(axis=0) / wm
                avg += wm * 4.0 * _variance_of(mixed)
            best = min(best, avg)
        lhs += best
    return float(lhs), float(rhs)


# ---------------------------------------------------------------------------
# E-V region sampling


def ev_pure_qubit_curve(grid) -> list:
    """Points ``(H(p), 4 p (1 - p))`` traced by two-level pure states."""
    out = []
    for p in grid:
        state_e = shannon_entropy([p, 1.0 - p])
        out.append((state_e, 4.0 * p * (1.0 - p)))
    return out


def qutrit_state(p0: float, p1: float, p2: float) -> SectoredPureState:
    amps = []
    for n, p in enumerate((p0, p1, p2)):
        if p > 0:
            amps.append((n, 2 - n, np.sqrt(p)))
    return make_pure(amps)


def qutrit_max_variance_boundary(a: float):
    """(eoe, siv) of ``sqrt(a)|0>|2> + sqrt(1-a)|2>|0>``."""
    return shannon_entropy([a, 1 - a]), 16.0 * a * (1.0 - a)


def qutrit_max_entanglement_boundary(variance: float):
    """Largest eoe reachable at the given siv, via symmetric three-level states."""
    a = variance / 8.0
    if not 0.0 <= a <= 0.5:
        raise ValueError("variance outside the reachable range [0, 4]")
    return shannon_entropy([a, 1.0 - 2 * a, a])


def ev_region_sample(level_count: int, samples: int, rng=None, mixed: bool = False):
    """Sample the entanglement-variance region.

    Pure two-level states land on the curve ``(H(p), 4p(1-p))``; pure
    three-level states fill the region between the maximal-variance and
    maximal-entanglement boundaries.  With ``mixed=True``, random two-qubit
    number-diagonal states are scored by their formation pair instead, plus
    the necessary separability flag.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if mixed:
        out = []
        for _ in range(samples):
            fp = formation_point(QubitSSRState.random(rng))
            out.append((fp.ef_ssr, fp.vf_ssr, fp.separable_flag))
        return out
    if level_count == 2:
        return ev_pure_qubit_curve(rng.uniform(0.0, 1.0, size=samples))
    if level_count == 3:
        out = []
        for _ in range(samples):
            p = rng.dirichlet([1.0, 1.0, 1.0])
            state = qutrit_state(*p)
            out.append((monotones.eoe(state), siv(state)))
        return out
    raise ValueError("pure-state sampling supports 2 or 3 levels")
