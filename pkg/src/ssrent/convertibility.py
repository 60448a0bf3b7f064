"""Single-copy convertibility and many-copy structure under the number rule.

A pure state with total count ``N`` decomposes into unnormalized
fixed-local-count components; local operations act sector by sector, so a
conversion ``phi -> {(p_i, psi_i)}`` is possible exactly when every sector's
unnormalized Schmidt vector is majorized by the probability-weighted sum of
the target sector vectors, with the sector totals matching (local sector
weights cannot be moved by local operations).

The many-copy side is verified quantitatively at desk scale: the exact
count distribution of product states, its Gaussian limit, the typical-set
binomial bounds, and the qubit split into constant-count and unit-variance
resource rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GapDetected, NotAQubitState, ScaleExceeded
from .fock import GeneralPureState, SectoredPureState
from .monotones import binary_entropy, eoe, shannon_entropy, siv

MAJORIZATION_TOL = 1e-10


@dataclass(frozen=True)
class SSRSchmidtVector:
    """Per-sector descending unnormalized Schmidt weights of a pure state."""

    per_sector: dict

    @classmethod
    def of(cls, state: SectoredPureState) -> "SSRSchmidtVector":
        return cls({n: tuple(state.schmidt_sector(n)) for n in range(state.total + 1)})

    def total_weight(self) -> float:
        return sum(sum(v) for v in self.per_sector.values())

    def sector_weight(self, n: int) -> float:
        return sum(self.per_sector.get(n, ()))


@dataclass(frozen=True)
class ConversionTask:
    """Source state and target ensemble sharing one total particle number."""

    source: SectoredPureState
    targets: tuple

    def __post_init__(self):
        probs = [p for p, _ in self.targets]
        if not probs or min(probs) <= 0:
            raise ValueError("target probabilities must be positive")
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"target probabilities sum to {sum(probs)}")
        for _, t in self.targets:
            if t.total != self.source.total:
                raise ValueError(
                    "targets must share the source total; relabel shifts away first"
                )

    @classmethod
    def deterministic(cls, source, target) -> "ConversionTask":
        return cls(source, ((1.0, target),))


def majorizes(lam, mu, tol: float = MAJORIZATION_TOL) -> bool:
    """True when ``lam`` is majorized by ``mu`` (partial sums of mu dominate).

    Vectors are sorted descending and zero-padded to a common length; the
    full sums must agree within tolerance.
    """
    lam = sorted((float(x) for x in lam), reverse=True)
    mu = sorted((float(x) for x in mu), reverse=True)
    size = max(len(lam), len(mu))
    lam += [0.0] * (size - len(lam))
    mu += [0.0] * (size - len(mu))
    if abs(sum(lam) - sum(mu)) > tol:
        return False
    run_l = run_m = 0.0
    for a, b in zip(lam, mu):
        run_l += a
        run_m += b
        if run_l > run_m + tol:
            return False
    return True


@dataclass(frozen=True)
class SectorDiagnostic:
    sector: int
    ok: bool
    weight_gap: float
    worst_partial_gap: float


def convertibility_report(task: ConversionTask):
    """Per-sector majorization diagnostics for a conversion task."""
    src = SSRSchmidtVector.of(task.source)
    out = []
    for n in range(task.source.total + 1):
        lam = list(src.per_sector.get(n, ()))
        avg = _weighted_target_vector(task, n)
        weight_gap = abs(sum(lam) - sum(avg))
        size = max(len(lam), len(avg), 1)
        lam_p = sorted(lam, reverse=True) + [0.0] * (size - len(lam))
        avg_p = sorted(avg, reverse=True) + [0.0] * (size - len(avg))
        worst = max(
            (
                sum(lam_p[: k + 1]) - sum(avg_p[: k + 1])
                for k in range(size)
            ),
            default=0.0,
        )
        ok = weight_gap <= MAJORIZATION_TOL and worst <= MAJORIZATION_TOL
        out.append(
            SectorDiagnostic(
                sector=n,
                ok=ok,
                weight_gap=float(weight_gap),
                worst_partial_gap=float(max(worst, 0.0)),
            )
        )
    return out


def _weighted_target_vector(task: ConversionTask, n: int):
    """Componentwise sum of probability-weighted descending target vectors."""
    vectors = []
    for p, t in task.targets:
        v = sorted(t.schmidt_sector(n), reverse=True)
        vectors.append((p, v))
    size = max((len(v) for _, v in vectors), default=0)
    out = [0.0] * size
    for p, v in vectors:
        for k, x in enumerate(v):
            out[k] += p * x
    return out


def ssr_convertible(task: ConversionTask) -> bool:
    """Decide whether the conversion admits a number-compatible protocol."""
    return all(d.ok for d in convertibility_report(task))


# ---------------------------------------------------------------------------
# Constructive protocol for the deterministic single-target case


def transfer_chain(lam, mu, tol: float = 1e-12):
    """Two-level transfers carrying ``mu`` to ``lam`` when ``lam`` is majorized.

    Returns a list of ``(i, j, t)``: mix levels ``i`` and ``j`` (descending
    order) with weight ``t``, i.e. the doubly stochastic map
    ``(1 - t) I + t P_ij`` applied to the current vector.
    """
    lam = np.array(sorted(lam, reverse=True), dtype=float)
    mu = np.array(sorted(mu, reverse=True), dtype=float)
    size = max(lam.size, mu.size)
    lam = np.pad(lam, (0, size - lam.size))
    cur = np.pad(mu, (0, size - mu.size))
    steps = []
    for _ in range(size * size):
        diff = cur - lam
        if np.max(np.abs(diff)) < tol:
            break
        donors = np.nonzero(diff > tol)[0]
        takers = np.nonzero(diff < -tol)[0]
        i = donors[-1]
        j = takers[0] if takers[0] > i else takers[-1]
        if j < i:
            i, j = j, i
        # a T-transform on (i, j): cur_i' = (1-t) cur_i + t cur_j
        gap = cur[i] - cur[j]
        if gap < tol:
            break
        t = min(cur[i] - lam[i], lam[j] - cur[j]) / gap
        t = min(max(t, 0.0), 0.5)
        new_i = (1 - t) * cur[i] + t * cur[j]
        new_j = (1 - t) * cur[j] + t * cur[i]
        cur[i], cur[j] = new_i, new_j
        steps.append((int(i), int(j), float(t)))
    return steps, cur


def permutation_mixture(steps, size: int):
    """Expand a product of two-level transfers into a permutation mixture."""
    terms = {tuple(range(size)): 1.0}
    for i, j, t in steps:
        new_terms = {}
        for perm, weight in terms.items():
            stay = weight * (1 - t)
            swap = weight * t
            if stay > 1e-16:
                new_terms[perm] = new_terms.get(perm, 0.0) + stay
            p = list(perm)
            p[i], p[j] = p[j], p[i]
            p = tuple(p)
            if swap > 1e-16:
                new_terms[p] = new_terms.get(p, 0.0) + swap
        terms = new_terms
    return terms


def conversion_protocol_sector(lam, mu):
    """Measurement operators converting a sector with ``lam`` majorized by ``mu``.

    In the Schmidt bases, outcome ``k`` applies the diagonal operator
    ``sqrt(q_k) diag(sqrt(mu[perm_k^-1(r)] / lam[r]))`` followed by the
    permutation on both parties; completeness holds because the permutation
    mixture maps ``mu`` to ``lam``.  Returns ``(q_k, perm_k, diagonal)``
    triples over the padded dimension.
    """
    steps, reached = transfer_chain(lam, mu)
    size = reached.size
    lam_p = np.array(sorted(lam, reverse=True), dtype=float)
    lam_p = np.pad(lam_p, (0, size - lam_p.size))
    mu_p = np.array(sorted(mu, reverse=True), dtype=float)
    mu_p = np.pad(mu_p, (0, size - mu_p.size))
    if np.max(np.abs(reached - lam_p)) > 1e-9:
        raise ValueError("transfer chain failed; sector is not majorized")
    out = []
    for perm, q in permutation_mixture(steps, size).items():
        diag = np.zeros(size)
        for r in range(size):
            if lam_p[r] > 1e-15:
                diag[r] = np.sqrt(mu_p[perm[r]] / lam_p[r])
        out.append((q, perm, diag))
    return out


def protocol_fidelity_report(source: SectoredPureState, target: SectoredPureState):
    """Run the constructive protocol sector by sector against the target.

    For every sector and every measurement branch, the branch state's
    normalized Schmidt weights are compared with the target's through the
    Bhattacharyya overlap (the fidelity after the branch's compensating
    local rotations).  Returns the minimum fidelity and the worst
    completeness defect.
    """
    min_fidelity = 1.0
    worst_completeness = 0.0
    for n in range(source.total + 1):
        lam = source.schmidt_sector(n)
        mu = target.schmidt_sector(n)
        if not lam and not mu:
            continue
        if not lam or not mu:
            return 0.0, 1.0
        branches = conversion_protocol_sector(lam, mu)
        size = len(branches[0][2])
        lam_p = np.pad(np.array(sorted(lam, reverse=True)), (0, size - len(lam)))
        mu_hat = np.array(sorted(mu, reverse=True)) / sum(mu)
        mu_hat = np.pad(mu_hat, (0, size - mu_hat.size))
        completeness = np.zeros(size)
        for q, perm, diag in branches:
            completeness += q * diag**2
            # branch Schmidt weights: q has been folded into the outcome
            branch = diag**2 * lam_p
            wt = branch.sum()
            if wt < 1e-15:
                return 0.0, 1.0
            branch /= wt
            # undo the branch permutation before comparing
            unperm = np.empty(size)
            for r in range(size):
                unperm[perm[r]] = branch[r]
            fid = float(np.sum(np.sqrt(unperm * mu_hat)) ** 2)
            min_fidelity = min(min_fidelity, fid)
        support = lam_p > 1e-15
        defect = float(np.max(np.abs(completeness[support] - 1.0), initial=0.0))
        worst_completeness = max(worst_completeness, defect)
    return min_fidelity, worst_completeness


# ---------------------------------------------------------------------------
# Many copies


def _log_domain_convolve(log_p, log_q):
    """Convolution of two log-domain weight vectors."""
    out = np.full(log_p.size + log_q.size - 1, -np.inf)
    for shift in range(log_q.size):
        if log_q[shift] == -np.inf:
            continue
        seg = log_p + log_q[shift]
        lo = shift
        hi = shift + log_p.size
        cur = out[lo:hi]
        mx = np.maximum(cur, seg)
        with np.errstate(invalid="ignore"):
            merged = mx + np.log1p(np.exp(-np.abs(cur - seg)))
        merged = np.where(np.isneginf(mx), -np.inf, merged)
        out[lo:hi] = merged
    return out


def product_state_distribution(state: SectoredPureState, copies: int) -> dict:
    """Exact distribution of Alice's total count over ``copies`` products.

    Computed by iterated log-domain convolution of the single-copy sector
    weights, so binomial and multinomial coefficients at a few hundred
    copies neither overflow nor underflow.
    """
    if copies < 1:
        raise ValueError("copies must be at least 1")
    single = state.alice_distribution()
    span = max(single) * copies
    if copies > 500 or span > 1200:
        raise ScaleExceeded(
            f"{copies} copies with support up to {span} exceeds the desk scale"
        )
    base = np.full(max(single) + 1, -np.inf)
    for n, w in single.items():
        if w > 0:
            base[n] = np.log(w)
    acc = base.copy()
    for _ in range(copies - 1):
        acc = _log_domain_convolve(acc, base)
    weights = np.exp(acc)
    return {n: float(w) for n, w in enumerate(weights) if w > 0.0}


def distribution_moments(dist: dict):
    total = sum(dist.values())
    mean = sum(n * w for n, w in dist.items()) / total
    var = sum((n - mean) ** 2 * w for n, w in dist.items()) / total
    return mean, var


def detect_gap(state: SectoredPureState) -> int:
    """Period of the single-copy support; a period > 1 leaves empty residues."""
    support = sorted(n for n, w in state.alice_distribution().items() if w > 1e-15)
    if len(support) < 2:
        return 0
    return math.gcd(*(b - support[0] for b in support[1:]))


def gaussian_convergence(state: SectoredPureState, copies: int):
    """Distance of the many-copy count distribution from its Gaussian limit.

    Returns ``(kl_divergence_bits, variance_ratio)`` against the discretized
    normal with matching mean and variance; the ratio compares the empirical
    variance with ``copies * siv(state) / 4``.  States whose single-copy
    support has period > 1 raise :class:`GapDetected` instead of being
    silently smoothed.
    """
    period = detect_gap(state)
    if period > 1:
        raise GapDetected(period, sorted(state.alice_distribution()))
    if period == 0:
        raise ValueError("degenerate single-level distribution has no Gaussian limit")
    dist = product_state_distribution(state, copies)
    mean, var = distribution_moments(dist)
    ns = np.arange(max(dist) + 1)
    gauss = np.exp(-((ns - mean) ** 2) / (2.0 * var))
    gauss /= gauss.sum()
    kl = 0.0
    for n, w in dist.items():
        if w > 0 and gauss[n] > 0:
            kl += w * np.log2(w / gauss[n])
    expected_var = copies * siv(state) / 4.0
    return float(kl), float(var / expected_var)


def typical_subspace_bounds(copies: int, p0: float, epsilon: float) -> bool:
    """Check the binomial two-sided entropy bounds on the typical window.

    For every count ``n0`` with ``|n0/copies - p0| < epsilon``:
    ``2^(N H(n0/N)) / (N+1)^2 <= C(N, n0) <= 2^(N H(n0/N))``,
    evaluated in the log domain.
    """
    if not 0.0 < p0 < 1.0:
        raise ValueError("p0 must lie strictly between 0 and 1")
    if not 0.0 < epsilon < min(p0, 1.0 - p0):
        raise ValueError("epsilon must satisfy 0 < eps < min(p0, 1-p0)")
    n = copies
    for n0 in range(n + 1):
        if abs(n0 / n - p0) >= epsilon:
            continue
        log2_binom = (
            math.lgamma(n + 1) - math.lgamma(n0 + 1) - math.lgamma(n - n0 + 1)
        ) / math.log(2.0)
        ent = n * binary_entropy(n0 / n)
        lower = ent - 2.0 * math.log2(n + 1)
        if not (lower - 1e-9 <= log2_binom <= ent + 1e-9):
            return False
    return True


def resource_split(state: SectoredPureState):
    """Asymptotic qubit rates: constant-count pairs and unit-variance pairs.

    A two-level state is worth ``eoe - siv`` constant-local-count pairs plus
    ``siv`` unit-variance pairs per copy; the first rate is non-negative
    because entanglement dominates variance for qubits.
    """
    occupied = [n for n in range(state.total + 1) if state.sector_weight(n) > 1e-15]
    ranks = [len([w for w in state.schmidt_sector(n) if w > 1e-15]) for n in occupied]
    if sum(ranks) > 2:
        raise NotAQubitState(
            "local support exceeds two dimensions; substitute the "
            "maximal-variance two-level embedding explicitly"
        )
    if len(occupied) == 2 and max(occupied) - min(occupied) > 1:
        raise NotAQubitState(
            "occupied levels are not adjacent; substitute the maximal-variance "
            "two-level embedding explicitly"
        )
    e, v = eoe(state), siv(state)
    return float(e - v), float(v)


def appendix_inequality_trial(psi: GeneralPureState):
    """Average entanglement created by a total-count measurement.

    ``lhs`` is the weighted entanglement of the total-count projections,
    ``rhs = E(psi) + log2(N + 1)`` with ``N`` the largest total in the
    support; the measurement can create at most ``log2(N + 1)`` bits.
    """
    psi = psi.normalized()
    n_max = psi.max_total()
    lhs = 0.0
    for total in range(n_max + 1):
        piece = psi.project_total(total)
        weight = piece.norm_squared()
        if weight < 1e-15:
            continue
        lhs += weight * piece.normalized().entanglement_entropy()
    rhs = psi.entanglement_entropy() + np.log2(n_max + 1)
    return float(lhs), float(rhs)
