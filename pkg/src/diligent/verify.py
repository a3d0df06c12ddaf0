"""Numerical checks of the multiplication-family variance bound and the
supporting counting, character-sum and inequality lemmas.

Every check returns a :class:`Record` with the measured quantity, the
bound it is compared against and a pass flag, so reports can be written
as JSON lines.

Character sums are evaluated from exact integer histograms of
``g(x_pi) - g(x_sigma) mod 10``; only the final ten-term sum is done in
floating point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .core import ParameterError
from .problems import K_DIGITS

__all__ = [
    "Record",
    "ExactSizeError",
    "ConsistencyError",
    "CharacterTable",
    "cycle_stats",
    "gamma_enumerated",
    "gamma_cycle_formula",
    "h_inner_product",
    "check_characters",
    "check_h_norm",
    "check_gamma_bound",
    "check_expectation_bound",
    "check_t_bound",
    "check_sum_bound",
    "geinq",
    "check_geinq",
    "check_parseval",
    "orthonormality_epsilon",
    "estimate_variance",
    "verify_all",
    "LEMMAS",
]

EXACT_LIMIT = 10**6
TOL = 1e-9
ORTHO_TOL = 1e-12


class ExactSizeError(ParameterError):
    """Exact enumeration requested beyond the configured size cap."""


class ConsistencyError(RuntimeError):
    """Two independent computations of the same quantity disagree."""


@dataclass
class Record:
    lemma: str
    parameters: dict
    measured: object
    bound: object
    passed: bool
    note: str = ""

    def to_json(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        if not d["note"]:
            d.pop("note")
        return d


# ---------------------------------------------------------------- characters


@dataclass
class CharacterTable:
    """Additive characters of Z_k: chi[w, z] = exp(2 pi i w z / k) and the
    vectors v_w with coordinates chi_w(-t)."""

    k: int = K_DIGITS
    chi: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)

    def __post_init__(self):
        w = np.arange(self.k)
        self.chi = np.exp(2j * np.pi * np.outer(w, w) / self.k)
        self.v = np.exp(-2j * np.pi * np.outer(w, w) / self.k)

    def orthogonality_error(self) -> float:
        # (1/k) sum_t chi_w(t) chi_e(-t) against the identity
        gram = self.chi @ self.v.T / self.k
        return float(np.max(np.abs(gram - np.eye(self.k))))

    def decomposition_error(self) -> float:
        """max_z |e_z - e_{z+5} - (2/k) sum_{w odd} chi_w(z) v_w|."""
        k = self.k
        odd = np.arange(1, k, 2)
        worst = 0.0
        for z in range(k):
            lhs = np.zeros(k)
            lhs[z] += 1
            lhs[(z + k // 2) % k] -= 1
            rhs = (2 / k) * (self.chi[odd, z][:, None] * self.v[odd]).sum(axis=0)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst


def check_characters(table: CharacterTable | None = None) -> list[Record]:
    table = CharacterTable() if table is None else table
    err = table.orthogonality_error()
    dec = table.decomposition_error()
    return [
        Record("character-orthogonality", {"k": table.k}, err, ORTHO_TOL, err <= ORTHO_TOL),
        Record("character-decomposition", {"k": table.k}, dec, ORTHO_TOL, dec <= ORTHO_TOL),
    ]


# ---------------------------------------------------------------- digit enumeration


def all_digits(length: int) -> np.ndarray:
    """Every x in {0..9}^length, one per row, in lexicographic order."""
    if K_DIGITS**length > EXACT_LIMIT:
        raise ExactSizeError(f"10^{length} inputs exceed the exact-enumeration cap")
    grids = np.indices((K_DIGITS,) * length, dtype=np.int16)
    return grids.reshape(length, -1).T.copy()


def g_values(pi: Sequence[int], X: np.ndarray) -> np.ndarray:
    """g(x_pi) for each row of X (shape N x 2m)."""
    m = len(pi)
    first = X[:, list(pi)].astype(np.int64)
    second = X[:, m:][:, ::-1].astype(np.int64)   # x_{2m-1-i}
    return (first * second).sum(axis=1) % K_DIGITS


def _diff_histogram(pi, sigma, X) -> np.ndarray:
    d = (g_values(pi, X) - g_values(sigma, X)) % K_DIGITS
    return np.bincount(d, minlength=K_DIGITS)


def _exact_inputs(m: int) -> np.ndarray:
    if m < 1:
        raise ParameterError("m must be positive")
    if m > 3:
        raise ExactSizeError(f"exact mode needs m <= 3, got {m}")
    return all_digits(2 * m)


# ---------------------------------------------------------------- cycles


def _as_perm(p, m: int | None = None) -> tuple[int, ...]:
    p = tuple(int(v) for v in p)
    if sorted(p) != list(range(len(p))) or (m is not None and len(p) != m):
        raise ParameterError(f"not a permutation: {p}")
    return p


def cycle_stats(pi: Sequence[int], sigma: Sequence[int]) -> tuple[int, int]:
    """(t, c): positions where pi and sigma differ, and the number of
    cycles formed by the constraints x_pi(i) = x_sigma(i) on them."""
    pi, sigma = _as_perm(pi), _as_perm(sigma, len(pi))
    # tau maps sigma(i) -> pi(i); its non-trivial cycles are the components
    tau = [0] * len(pi)
    for i in range(len(pi)):
        tau[sigma[i]] = pi[i]
    seen = [False] * len(pi)
    t = c = 0
    for start in range(len(pi)):
        if seen[start] or tau[start] == start:
            continue
        c += 1
        j = start
        while not seen[j]:
            seen[j] = True
            t += 1
            j = tau[j]
    return t, c


def gamma_cycle_formula(pi, sigma, omega: int) -> float:
    """Closed form of Gamma_omega: q^{-(t-c)} with q = k / gcd(omega, k).

    For omega coprime to 10 this is 10^{-(t-c)}. For omega = 5 only the
    parity of each digit difference matters, so q = 2.
    """
    t, c = cycle_stats(pi, sigma)
    q = K_DIGITS // math.gcd(omega % K_DIGITS, K_DIGITS)
    return float(Fraction(1, q ** (t - c)))


def gamma_enumerated(pi, sigma, m: int, omega: int, X: np.ndarray | None = None) -> complex:
    X = _exact_inputs(m) if X is None else X
    hist = _diff_histogram(pi, sigma, X)
    chi = np.exp(2j * np.pi * omega * np.arange(K_DIGITS) / K_DIGITS)
    return complex((hist * chi).sum() / hist.sum())


def h_inner_product(pi, sigma, m: int, X: np.ndarray | None = None) -> float:
    """<h_pi, h_sigma>_D; pointwise it is 1[d = 0] - 1[d = 5] with d the
    difference of the two target digits."""
    X = _exact_inputs(m) if X is None else X
    hist = _diff_histogram(pi, sigma, X)
    return float(Fraction(int(hist[0]) - int(hist[5]), int(hist.sum())))


# ---------------------------------------------------------------- h norm


def check_h_norm(pi, m: int, X: np.ndarray | None = None) -> float:
    """|<h_pi, h_pi>_D - 1| with h_pi = (k / sqrt 2)(f_pi - U_k)."""
    pi = _as_perm(pi, m)
    X = _exact_inputs(m) if X is None else X
    g = g_values(pi, X)
    total = 0.0
    for lo in range(0, len(g), 1 << 16):
        gg = g[lo:lo + (1 << 16)]
        f = np.full((len(gg), K_DIGITS), 1.0 / K_DIGITS)
        rows = np.arange(len(gg))
        f[rows, gg] += 1.0 / K_DIGITS
        f[rows, (gg + 5) % K_DIGITS] -= 1.0 / K_DIGITS
        h = (K_DIGITS / math.sqrt(2)) * (f - 1.0 / K_DIGITS)
        total += float(np.einsum("ij,ij->", h, h))
    return abs(total / len(g) - 1.0)


# ---------------------------------------------------------------- Gamma bound


@dataclass(frozen=True)
class GammaCheck:
    exact: float
    formula: float
    bound: float
    t: int
    c: int

    @property
    def passes(self) -> bool:
        return abs(self.exact) <= self.bound + TOL


def check_gamma_bound(pi, sigma, m: int, omega: int, X: np.ndarray | None = None) -> GammaCheck:
    """|Gamma_omega(pi, sigma)| two ways, against 2^{-t(pi, sigma)}."""
    pi, sigma = _as_perm(pi, m), _as_perm(sigma, m)
    if pi == sigma:
        raise ParameterError("pi and sigma must differ")
    exact = gamma_enumerated(pi, sigma, m, omega, X)
    formula = gamma_cycle_formula(pi, sigma, omega)
    if abs(exact - formula) > ORTHO_TOL:
        raise ConsistencyError(
            f"Gamma_{omega}({pi}, {sigma}): enumeration {exact} vs cycle formula {formula}")
    t, c = cycle_stats(pi, sigma)
    return GammaCheck(abs(exact), formula, 2.0**-t, t, c)


# ---------------------------------------------------------------- derangement lemma


def _is_derangement(sigma) -> bool:
    return all(s != i for i, s in enumerate(sigma))


@dataclass(frozen=True)
class ExpectationCheck:
    value: float
    bound: float
    method: str
    sampled: float | None = None
    sampled_se: float | None = None

    @property
    def passes(self) -> bool:
        return self.value <= self.bound + TOL


def check_expectation_bound(sigma, m: int | None = None, omega: int = 1, *,
                            samples: int = 0, rng=None) -> ExpectationCheck:
    """|E_{a,b} exp(2 pi i omega/k sum_i (a_i - a_sigma(i)) b_i)| against 2^{-m}.

    Exact enumeration for m <= 3, the cycle formula up to m = 8. With
    ``samples`` > 0 a Monte Carlo estimate is attached as a cross-check.
    """
    m = len(sigma) if m is None else m
    sigma = _as_perm(sigma, m)
    if not _is_derangement(sigma):
        raise ParameterError("sigma must have no fixed point")
    if m > 8:
        raise ExactSizeError("expectation check supports m <= 8")
    ident = tuple(range(m))
    if m <= 3:
        X = all_digits(2 * m)
        a, b = X[:, :m].astype(np.int64), X[:, m:].astype(np.int64)
        s = ((a - a[:, list(sigma)]) * b).sum(axis=1) % K_DIGITS
        hist = np.bincount(s, minlength=K_DIGITS)
        chi = np.exp(2j * np.pi * omega * np.arange(K_DIGITS) / K_DIGITS)
        value, method = abs(complex((hist * chi).sum() / hist.sum())), "enumeration"
        formula = gamma_cycle_formula(ident, sigma, omega)
        if abs(value - formula) > ORTHO_TOL:
            raise ConsistencyError(f"expectation {value} vs cycle formula {formula}")
    else:
        value, method = gamma_cycle_formula(ident, sigma, omega), "cycle-formula"
    sampled = se = None
    if samples:
        rng = np.random.default_rng(0) if rng is None else rng
        est = []
        for lo in range(0, samples, 1 << 17):
            n = min(1 << 17, samples - lo)
            a = rng.integers(0, K_DIGITS, size=(n, m))
            b = rng.integers(0, K_DIGITS, size=(n, m))
            s = ((a - a[:, list(sigma)]) * b).sum(axis=1) % K_DIGITS
            est.append(np.cos(2 * np.pi * omega * s / K_DIGITS))
        vals = np.concatenate(est)
        sampled, se = float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))
    return ExpectationCheck(value, 2.0**-m, method, sampled, se)


def _inverse(p) -> tuple[int, ...]:
    inv = [0] * len(p)
    for i, v in enumerate(p):
        inv[v] = i
    return tuple(inv)


def derangement_cycle_types(m: int) -> list[tuple[int, ...]]:
    """One representative derangement per cycle type (parts >= 2)."""
    out = []

    def parts(rest, smallest, acc):
        if rest == 0:
            out.append(tuple(acc))
            return
        for p in range(smallest, rest + 1):
            parts(rest - p, p, acc + [p])

    parts(m, 2, [])
    reps = []
    for ptn in out:
        sigma = list(range(m))
        pos = 0
        for ln in ptn:
            for j in range(ln):
                sigma[pos + j] = pos + (j + 1) % ln
            pos += ln
        reps.append(tuple(sigma))
    return reps


# ---------------------------------------------------------------- counting lemmas


def _t_histogram(m: int) -> list[int]:
    # t(pi, sigma) depends only on sigma^{-1} pi, which is uniform on S_m
    counts = [0] * (m + 1)
    for p in itertools.permutations(range(m)):
        counts[sum(1 for i, v in enumerate(p) if v != i)] += 1
    return counts


def check_t_bound(m: int, *, pairs: bool = True) -> list[Record]:
    """Exact Pr[t(pi, sigma) = d] over uniform pairs, d in 2..m-1, against
    the strict bound 1/(m-d)!. With ``pairs`` the count runs over all
    (m!)^2 pairs, otherwise over sigma^{-1} pi."""
    if not 2 <= m <= 6:
        raise ExactSizeError("t-count enumeration supports 2 <= m <= 6")
    if pairs:
        perms = np.array(list(itertools.permutations(range(m))), dtype=np.int8)
        counts = np.zeros(m + 1, dtype=np.int64)
        for p in perms:
            counts += np.bincount((perms != p).sum(axis=1), minlength=m + 1)
        total = len(perms) ** 2
        counts = [int(c) for c in counts]
    else:
        counts = _t_histogram(m)
        total = math.factorial(m)
    recs = []
    for d in range(1, m):
        prob = Fraction(counts[d], total)
        if d == 1:
            recs.append(Record("t-count", {"m": m, "d": 1}, float(prob), 0.0, prob == 0,
                               "two permutations never differ in one place"))
            continue
        bound = Fraction(1, math.factorial(m - d))
        recs.append(Record("t-count", {"m": m, "d": d}, float(prob), float(bound), prob < bound))
    return recs


def sum_bound_lhs(m: int) -> Fraction:
    return sum((Fraction(1, 4**d * math.factorial(m - d)) for d in range(2, m)), Fraction(0))


def check_sum_bound(m_range: Iterable[int] = range(3, 31)) -> list[Record]:
    """Both constants that appear for the geometric-factorial sum:
    (e^4 - 1) 4^-m for the sum itself, and e^4 4^-m once the d = m term
    4^-m is added."""
    recs = []
    e4 = math.exp(4)
    for m in m_range:
        if not 3 <= m <= 30:
            raise ParameterError("sum bound checked for m in 3..30")
        lhs = sum_bound_lhs(m)
        rhs = (e4 - 1) * 4.0**-m
        recs.append(Record("sum-bound", {"m": m, "constant": "e^4-1"}, float(lhs), rhs,
                           float(lhs) <= rhs, f"ratio {float(lhs) / rhs:.6g}"))
        lhs2 = lhs + Fraction(1, 4**m)
        rhs2 = e4 * 4.0**-m
        recs.append(Record("sum-bound", {"m": m, "constant": "e^4", "with_d_equals_m": True},
                           float(lhs2), rhs2, float(lhs2) <= rhs2))
    return recs


# ---------------------------------------------------------------- geometric inequality


def geinq(gamma, eps):
    """(gamma(1-eps) / (gamma(1-eps) + eps), 1 - eps/gamma)."""
    lhs = gamma * (1 - eps) / (gamma * (1 - eps) + eps)
    return lhs, 1 - eps / gamma


def check_geinq(grid: int = 100) -> Record:
    """Worst margin over gamma = i/grid (i = 1..grid) and
    eps = gamma j/(grid+1) (j = 1..grid), in exact rational arithmetic."""
    worst = None
    where = None
    for i in range(1, grid + 1):
        g = Fraction(i, grid)
        for j in range(1, grid + 1):
            e = g * Fraction(j, grid + 1)
            lhs, rhs = geinq(g, e)
            margin = lhs - rhs
            if worst is None or margin < worst:
                worst, where = margin, (float(g), float(e))
    return Record("geometric-inequality", {"grid": grid, "argmin": where},
                  float(worst), 0.0, worst >= 0)


# ---------------------------------------------------------------- approximate Parseval


@dataclass(frozen=True)
class ParsevalResult:
    epsilon: float
    violations: int
    probes: int
    worst_ratio: float   # max over probes of lhs / ((1/n + eps)|phi|^2)


def _h_inner(f, g, D):
    # <f, g>_H = mean over X of coordinate dot products; arrays are (n, D*k)
    return f @ g.T / D


def check_parseval(n: int, domain_size: int, k: int, noise: float, probes: int,
                   rng=None) -> ParsevalResult:
    """Orthonormal family (up to ``noise``) against random and worst-case
    probes. The worst-case probe is the top eigenvector of the family's
    frame operator."""
    rng = np.random.default_rng(0) if rng is None else rng
    dim = domain_size * k
    if n > dim:
        raise ParameterError("n cannot exceed domain_size * k")
    q, _ = np.linalg.qr(rng.standard_normal((dim, n)))
    H = math.sqrt(domain_size) * q.T                    # <h_i, h_j>_H = delta_ij
    H = H + noise * rng.standard_normal(H.shape)
    E = _h_inner(H, H, domain_size) - np.eye(n)
    eps = float(np.sqrt(np.mean(E**2)))

    phis = [rng.uniform(-1, 1, size=dim) for _ in range(probes // 2)]
    phis += [rng.standard_normal(dim) for _ in range(probes - probes // 2 - 2)]
    phis.append(H[0].copy())
    _, vecs = np.linalg.eigh(H.T @ H) if dim <= 2000 else (None, None)
    if vecs is not None:
        phis.append(vecs[:, -1])
    else:
        phis.append(H.sum(axis=0))
    violations = 0
    worst = 0.0
    for phi in phis:
        lhs = float(np.mean(_h_inner(H, phi[None, :], domain_size) ** 2))
        rhs = (1 / n + eps) * float(phi @ phi / domain_size)
        worst = max(worst, lhs / rhs)
        if lhs > rhs * (1 + TOL):
            violations += 1
    return ParsevalResult(eps, violations, len(phis), worst)


# ---------------------------------------------------------------- variance theorem


def orthonormality_epsilon(m: int) -> float:
    """Exact sqrt(E_{pi,sigma} (<h_pi,h_sigma>_D - delta)^2) over S_m x S_m.

    Uses <h_pi,h_sigma>_D = (2/k) sum_{omega odd} Gamma_omega and the
    cycle formula, so m up to 8 is cheap.
    """
    if not 1 <= m <= 8:
        raise ParameterError("m in 1..8")
    ident = tuple(range(m))
    total = 0.0
    for p in itertools.permutations(range(m)):
        if p == ident:
            continue
        ip = (2 / K_DIGITS) * sum(gamma_cycle_formula(ident, p, w) for w in (1, 3, 5, 7, 9))
        total += ip * ip
    return math.sqrt(total / math.factorial(m))


def variance_bound(m: int) -> float:
    return 1 / math.factorial(m) + math.exp(2) * 2.0**-m


class _Net:
    """Tiny two-layer network on one-hot digits, used only to produce
    gradient-shaped probes."""

    def __init__(self, length: int, hidden: int, rng):
        self.length = length
        self.W1 = rng.standard_normal((hidden, length * K_DIGITS))
        self.b1 = rng.standard_normal(hidden) * 0.1
        self.W2 = rng.standard_normal((K_DIGITS, hidden))
        self.sizes = (self.W1.size, self.b1.size, self.W2.size)

    def forward(self, X, params=None):
        W1, b1, W2 = params if params is not None else (self.W1, self.b1, self.W2)
        cols = X.astype(np.int64) + K_DIGITS * np.arange(self.length)
        pre = W1[:, cols].sum(axis=2).T + b1           # (N, hidden)
        return np.tanh(pre) @ W2.T                      # (N, k)

    def clipped_fd_gradient(self, X, index: int, step: float = 1e-4) -> np.ndarray:
        """Column ``index`` of the Jacobian by central differences, clipped
        elementwise to [-1, 1]."""
        flat = np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel()])

        def unpack(v):
            a, b, _ = self.sizes
            return (v[:a].reshape(self.W1.shape), v[a:a + b], v[a + b:].reshape(self.W2.shape))

        up, dn = flat.copy(), flat.copy()
        up[index] += step
        dn[index] -= step
        grad = (self.forward(X, unpack(up)) - self.forward(X, unpack(dn))) / (2 * step)
        return np.clip(grad, -1.0, 1.0)


@dataclass(frozen=True)
class VarianceResult:
    m: int
    estimate: float          # max over probes of the estimated E_pi <phi, f_pi - U>^2
    upper: float             # same with a 99% upper confidence adjustment when sampled
    bound: float
    exceedances: int
    probes: int
    exact_inner: bool
    per_probe: tuple = ()

    @property
    def passes(self) -> bool:
        return self.exceedances == 0


def _probe_values(kind: str, X, rng, net=None, index=None, aligned_g=None):
    n = len(X)
    if kind == "uniform":
        return rng.uniform(-1, 1, size=(n, K_DIGITS))
    if kind == "sign":
        return rng.choice((-1.0, 1.0), size=(n, K_DIGITS))
    if kind == "aligned":
        phi = np.zeros((n, K_DIGITS))
        rows = np.arange(n)
        phi[rows, aligned_g] = 1.0
        phi[rows, (aligned_g + 5) % K_DIGITS] = -1.0
        return phi
    if kind == "gradient":
        return net.clipped_fd_gradient(X, index)
    if kind == "constant":
        return np.full((n, K_DIGITS), 0.7)
    raise ParameterError(kind)


def estimate_variance(m: int, perm_samples: int = 50, probe_samples: int = 100, *,
                      rng=None, x_samples: int = 200_000) -> VarianceResult:
    """One-sided check of Var(F) <= 1/m! + e^2 2^-m on sampled probes.

    For m <= 3 inner products are exact over all 10^{2m} inputs; for m = 4, 5
    they are Monte Carlo estimates over ``x_samples`` inputs and the upper
    value adds a 2.58 standard-error margin before squaring. The
    expectation over pi is exact when m! <= perm_samples.
    """
    if not 1 <= m <= 5:
        raise ParameterError("variance estimate supports m <= 5")
    rng = np.random.default_rng(0) if rng is None else rng
    exact = m <= 3
    X = all_digits(2 * m) if exact else rng.integers(0, K_DIGITS, size=(x_samples, 2 * m)).astype(np.int16)
    perms = list(itertools.permutations(range(m)))
    if len(perms) > perm_samples:
        perms = [perms[i] for i in rng.integers(0, len(perms), size=perm_samples)]
    G = [g_values(p, X) for p in perms]
    rows = np.arange(len(X))
    net = _Net(2 * m, 4, rng)
    n_params = sum(net.sizes)
    kinds = ["aligned", "constant"] + ["uniform", "sign", "gradient", "gradient"] * probe_samples
    kinds = kinds[:max(probe_samples, 2)]
    bound = variance_bound(m)
    best = best_upper = 0.0
    exceed = 0
    per = []
    for kind in kinds:
        phi = _probe_values(kind, X, rng, net=net, index=int(rng.integers(0, n_params)),
                            aligned_g=G[0])
        sq = []
        sq_up = []
        for g in G:
            # <phi, f_pi - U>_D = (1/k) E_x [phi_g(x) - phi_{g+5}(x)]
            vals = (phi[rows, g] - phi[rows, (g + 5) % K_DIGITS]) / K_DIGITS
            mean = float(vals.mean())
            sq.append(mean * mean)
            if exact:
                sq_up.append(mean * mean)
            else:
                se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
                sq_up.append((abs(mean) + 2.58 * se) ** 2)
        est, up = float(np.mean(sq)), float(np.mean(sq_up))
        per.append((kind, est))
        best, best_upper = max(best, est), max(best_upper, up)
        if est > bound:
            exceed += 1
    return VarianceResult(m, best, best_upper, bound, exceed, len(kinds), exact, tuple(per))


# ---------------------------------------------------------------- driver


def _random_pair(m, rng):
    while True:
        p = tuple(int(v) for v in rng.permutation(m))
        s = tuple(int(v) for v in rng.permutation(m))
        if p != s:
            return p, s


def _lemma_characters(rng, table=None):
    return check_characters(table)


def _lemma_h_norm(rng, table=None):
    recs = []
    for m, perms in ((1, [(0,)]), (2, [tuple(rng.permutation(2)) for _ in range(20)]),
                     (3, [(0, 1, 2)])):
        X = all_digits(2 * m)
        worst = max(check_h_norm(p, m, X) for p in perms)
        recs.append(Record("h-norm", {"m": m, "perms": len(perms)}, worst, ORTHO_TOL,
                           worst <= ORTHO_TOL))
    return recs


def _lemma_gamma(rng, table=None, pairs: int = 200):
    chis = {w: np.exp(2j * np.pi * w * np.arange(K_DIGITS) / K_DIGITS) for w in (1, 3, 5, 7, 9)}
    gs = {}
    for m in (2, 3):
        X = all_digits(2 * m)
        for p in itertools.permutations(range(m)):
            gs[p] = g_values(p, X)
    per_omega = {w: [0.0, 0, 0.0] for w in chis}   # worst ratio, fails, max formula gap
    for i in range(pairs):
        m = 2 if i % 4 == 0 else 3
        p, s = _random_pair(m, rng)
        hist = np.bincount((gs[p] - gs[s]) % K_DIGITS, minlength=K_DIGITS)
        t, _ = cycle_stats(p, s)
        for w, chi in chis.items():
            exact = abs(complex((hist * chi).sum() / hist.sum()))
            formula = gamma_cycle_formula(p, s, w)
            gap = abs(exact - formula)
            if gap > ORTHO_TOL:
                raise ConsistencyError(f"Gamma_{w}({p}, {s}): {exact} vs {formula}")
            acc = per_omega[w]
            acc[0] = max(acc[0], exact / 2.0**-t)
            acc[1] += exact > 2.0**-t + TOL
            acc[2] = max(acc[2], gap)
    recs = []
    for w, (ratio, fails, gap) in per_omega.items():
        recs.append(Record("gamma-bound", {"omega": w, "pairs": pairs, "m": [2, 3],
                                           "max_formula_gap": gap},
                           ratio, 1.0, fails == 0,
                           f"max |Gamma|/2^-t over pairs; {fails} pairs above the bound"))
    return recs


def _lemma_h_inner(rng, table=None):
    """The derived claim <h_pi, h_sigma>_D <= 2^{-t}: exact for m <= 3,
    then over every cycle type up to m = 8 via the closed form."""
    recs = []
    for m in (2, 3):
        X = all_digits(2 * m)
        worst, fails = 0.0, 0
        for p in itertools.permutations(range(m)):
            s = tuple(range(m))
            if p == s:
                continue
            ip = h_inner_product(p, s, m, X)
            closed = (2 / K_DIGITS) * sum(gamma_cycle_formula(p, s, w) for w in (1, 3, 5, 7, 9))
            if abs(ip - closed) > ORTHO_TOL:
                raise ConsistencyError("inner product disagrees with the character expansion")
            t, _ = cycle_stats(p, s)
            worst = max(worst, ip / 2.0**-t)
            fails += ip > 2.0**-t + TOL
        recs.append(Record("h-inner-product", {"m": m, "method": "enumeration"}, worst, 1.0,
                           fails == 0))
    worst, fails, where = 0.0, 0, None
    for m in range(2, 9):
        for s in derangement_cycle_types(m):
            ip = (2 / K_DIGITS) * sum(gamma_cycle_formula(tuple(range(m)), s, w)
                                      for w in (1, 3, 5, 7, 9))
            ratio = ip / 2.0**-m
            if ratio > worst:
                worst, where = ratio, s
            fails += ip > 2.0**-m + TOL
    recs.append(Record("h-inner-product", {"m": "2..8", "method": "cycle-formula",
                                           "argmax": where}, worst, 1.0, fails == 0))
    return recs


def _lemma_expectation(rng, table=None):
    recs = []
    cases = [(1, 0), (1, 2, 0)] + [s for m in range(4, 9) for s in derangement_cycle_types(m)]
    for w in (1, 3, 5, 7, 9):
        worst, fails = 0.0, 0
        for s in cases:
            r = check_expectation_bound(s, omega=w)
            worst = max(worst, r.value / r.bound)
            fails += not r.passes
        recs.append(Record("expectation-bound", {"omega": w, "cases": len(cases), "m": "2..8"},
                           worst, 1.0, fails == 0, "max value/2^-m over derangement cycle types"))
    spot = check_expectation_bound((1, 0, 3, 2), omega=1, samples=10**6, rng=rng)
    agree = abs(spot.sampled - spot.value) <= 4 * spot.sampled_se
    recs.append(Record("expectation-bound-sampled", {"sigma": [1, 0, 3, 2], "samples": 10**6},
                       spot.sampled, spot.value, agree and spot.passes,
                       f"standard error {spot.sampled_se:.2e}"))
    return recs


def _lemma_t(rng, table=None):
    recs = []
    for m in range(3, 7):
        recs += check_t_bound(m, pairs=m <= 5)
    return recs


def _lemma_sum(rng, table=None):
    return check_sum_bound(range(3, 31))


def _lemma_geinq(rng, table=None):
    return [check_geinq(100)]


def _lemma_parseval(rng, table=None):
    recs = []
    for noise in (0.0, 0.05):
        r = check_parseval(40, 50, 10, noise, 1000, rng)
        recs.append(Record("approximate-parseval", {"n": 40, "domain": 50, "k": 10,
                                                    "noise": noise, "epsilon": r.epsilon},
                           r.violations, 0, r.violations == 0,
                           f"worst lhs/rhs {r.worst_ratio:.4f} over {r.probes} probes"))
    for m in range(2, 8):
        eps = orthonormality_epsilon(m)
        bound = math.exp(2) * 2.0**-m
        recs.append(Record("orthonormality-epsilon", {"m": m}, eps, bound, eps <= bound))
    return recs


def _lemma_variance(rng, table=None):
    recs = []
    for m, probes in ((2, 100), (3, 20), (4, 12), (5, 12)):
        r = estimate_variance(m, 50, probes, rng=rng, x_samples=100_000)
        recs.append(Record("variance", {"m": m, "probes": r.probes, "exact_inner": r.exact_inner},
                           r.estimate, r.bound, r.passes,
                           f"99% upper value {r.upper:.4g}"))
    return recs


LEMMAS = {
    "characters": _lemma_characters,
    "h-norm": _lemma_h_norm,
    "gamma-bound": _lemma_gamma,
    "h-inner-product": _lemma_h_inner,
    "expectation-bound": _lemma_expectation,
    "t-count": _lemma_t,
    "sum-bound": _lemma_sum,
    "geometric-inequality": _lemma_geinq,
    "parseval": _lemma_parseval,
    "variance": _lemma_variance,
}


def verify_all(lemma: str | None = None, seed: int = 0,
               table: CharacterTable | None = None) -> list[Record]:
    """Run every check (or one, by name) at default parameters."""
    if lemma is not None and lemma not in LEMMAS:
        raise ParameterError(f"unknown lemma {lemma!r}; choose from {sorted(LEMMAS)}")
    names = [lemma] if lemma else list(LEMMAS)
    out = []
    for i, name in enumerate(names):
        rng = np.random.default_rng([seed, list(LEMMAS).index(name)])
        out += LEMMAS[name](rng, table)
    return out
