"""Perturbed random walks T_k = S_{k-1} + eta_k, their visit counts N(x), the
renewal counts nu(t), and Monte Carlo checks of the uniform law of large
numbers, window-growth and increment-bound properties."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .sampling import RngStream, StickLaw

__all__ = [
    "StepLaw",
    "PrwPath",
    "simulate_path",
    "path_from_sticks",
    "count_visits",
    "count_renewals",
    "visit_process",
    "verify_lln_uniform",
    "verify_window_growth",
    "verify_visit_increment_bound",
]


@dataclass(frozen=True)
class StepLaw:
    """Joint law of one step (xi, eta), both strictly positive.

    xi:  ("exp", rate) | ("pareto", alpha) | ("const", c) | ("logstick", StickLaw)
    eta: ("exp", rate) | ("const", c) | ("log1mstick", StickLaw)

    dependence "sharedstick" draws a single stick factor W per step and sets
    (xi, eta) = (|log W|, |log(1-W)|); it requires both marginals to be the
    log forms of the same StickLaw.  "pareto" means P{xi > x} = x**(-alpha)
    for x >= 1, the minimal representative with exactly computable
    normalizers c(n) = n**(1/alpha).
    """

    xi: tuple
    eta: tuple
    dependence: str = "independent"

    def __post_init__(self):
        kx, px = self.xi[0], self.xi[1]
        if kx == "exp" and px <= 0:
            raise ValueError("exp rate must be > 0")
        if kx == "pareto" and px <= 0:
            raise ValueError("pareto alpha must be > 0")
        if kx == "const" and px <= 0:
            raise ValueError("const step must be > 0")
        if kx == "logstick" and not isinstance(px, StickLaw):
            raise ValueError("logstick requires a StickLaw")
        if kx not in ("exp", "pareto", "const", "logstick"):
            raise ValueError(f"unknown xi spec: {kx!r}")
        ke, pe = self.eta[0], self.eta[1]
        if ke == "exp" and pe <= 0:
            raise ValueError("exp rate must be > 0")
        if ke == "const" and pe <= 0:
            raise ValueError("eta must be strictly positive")
        if ke == "log1mstick" and not isinstance(pe, StickLaw):
            raise ValueError("log1mstick requires a StickLaw")
        if ke not in ("exp", "const", "log1mstick"):
            raise ValueError(f"unknown eta spec: {ke!r}")
        if self.dependence == "sharedstick":
            if kx != "logstick" or ke != "log1mstick" or px is not pe:
                raise ValueError("sharedstick requires log forms of one StickLaw")
        elif self.dependence != "independent":
            raise ValueError(f"unknown dependence: {self.dependence!r}")

    @staticmethod
    def exp_exp(rate_xi=1.0, rate_eta=1.0):
        return StepLaw(("exp", rate_xi), ("exp", rate_eta))

    @staticmethod
    def shared_stick(stick: StickLaw):
        return StepLaw(("logstick", stick), ("log1mstick", stick), "sharedstick")

    def draw(self, rng: RngStream, size: int):
        """Vector of steps: (xi array, eta array)."""
        if self.dependence == "sharedstick":
            w = self.xi[1].sample(rng, size)
            return -np.log(w), -np.log1p(-w)
        xi = self._draw_one(self.xi, rng, size)
        eta = self._draw_one(self.eta, rng, size)
        return xi, eta

    @staticmethod
    def _draw_one(spec, rng, size):
        kind, par = spec
        if kind == "exp":
            return rng.gen.exponential(1.0 / par, size)
        if kind == "const":
            return np.full(size, float(par))
        if kind == "pareto":
            u = rng.gen.random(size)
            u[u == 0.0] = 0.5
            return u ** (-1.0 / par)
        w = par.sample(rng, size)
        return -np.log(w) if kind == "logstick" else -np.log1p(-w)

    def mean_xi(self) -> float:
        kind, par = self.xi
        if kind == "exp":
            return 1.0 / par
        if kind == "const":
            return float(par)
        if kind == "pareto":
            return par / (par - 1.0) if par > 1.0 else math.inf
        return par.mean_abs_log()

    def var_xi(self) -> float:
        kind, par = self.xi
        if kind == "exp":
            return 1.0 / par**2
        if kind == "const":
            return 0.0
        if kind == "pareto":
            if par <= 2.0:
                return math.inf
            return par / ((par - 1.0) ** 2 * (par - 2.0))
        return par.var_abs_log()


@dataclass
class PrwPath:
    """One realised walk: partial sums S_0..S_K and perturbed points T_1..T_K.

    Counts are valid for arguments up to ``horizon`` (the walk was extended
    until S_K exceeded it, and eta > 0 means no later index can contribute).
    """

    s_values: np.ndarray
    t_values: np.ndarray
    horizon: float
    _t_sorted_cache: np.ndarray = field(default=None, repr=False)

    @property
    def _t_sorted(self) -> np.ndarray:
        if self._t_sorted_cache is None:
            self._t_sorted_cache = np.sort(self.t_values)
        return self._t_sorted_cache

    def count_visits(self, x: float) -> int:
        """N(x) = #{k : T_k <= x}."""
        self._check(x)
        return int(np.searchsorted(self._t_sorted, x, side="right"))

    def count_visits_strict(self, x: float) -> int:
        """Left limit N(x-) = #{k : T_k < x}."""
        self._check(x)
        return int(np.searchsorted(self._t_sorted, x, side="left"))

    def count_renewals(self, t: float) -> int:
        """nu(t) = #{k >= 0 : S_k <= t}; identically 0 for t < 0."""
        if t < 0.0:
            return 0
        self._check(t)
        return int(np.searchsorted(self.s_values, t, side="right"))

    def _check(self, x):
        if x > self.horizon:
            raise ValueError(f"argument {x} beyond realised horizon {self.horizon}")

    def to_json(self) -> str:
        return json.dumps({"s_values": list(map(float, self.s_values)),
                           "t_values": list(map(float, self.t_values))})

    @staticmethod
    def from_json(text: str) -> "PrwPath":
        obj = json.loads(text)
        s = np.asarray(obj["s_values"], dtype=float)
        t = np.asarray(obj["t_values"], dtype=float)
        return PrwPath(s, t, horizon=float(s[-1]))


def simulate_path(law: StepLaw, horizon: float, rng: RngStream) -> PrwPath:
    """Realise the walk until S_k > horizon (so all T_k <= horizon are seen)."""
    if horizon < 0.0:
        raise ValueError("horizon must be >= 0")
    m = law.mean_xi()
    block = 64 if not math.isfinite(m) else max(64, int(1.2 * horizon / m) + 32)
    s_chunks = [np.zeros(1)]
    t_chunks = []
    s_last = 0.0
    while s_last <= horizon:
        xi, eta = law.draw(rng, block)
        s_prev = s_last + np.concatenate([[0.0], np.cumsum(xi[:-1])])
        s_new = s_prev + xi
        t_new = s_prev + eta
        # keep indices with S_{k-1} <= horizon; later T_k exceed horizon a.s.
        keep = s_prev <= horizon
        t_chunks.append(t_new[keep])
        stop = np.searchsorted(s_new > horizon, True)
        if stop < block:
            s_chunks.append(s_new[: stop + 1])
            s_last = s_new[stop]
        else:
            s_chunks.append(s_new)
            s_last = s_new[-1]
    return PrwPath(np.concatenate(s_chunks), np.concatenate(t_chunks), horizon=float(horizon))


def path_from_sticks(sticks) -> PrwPath:
    """Walk driven by realised stick factors: xi = |log W|, eta = |log(1-W)|.

    This is the shared-arithmetic bridge between a sieve environment and its
    associated walk: both sides use exactly these cumulative sums, so counting
    identities hold bitwise on shared realisations.
    """
    w = np.asarray(sticks, dtype=float)
    xi = -np.log(w)
    eta = -np.log1p(-w)
    s = np.concatenate([[0.0], np.cumsum(xi)])
    t = s[:-1] + eta
    return PrwPath(s, t, horizon=float(s[-1]))


def count_visits(law: StepLaw, x: float, rng: RngStream) -> int:
    """N(x) for a fresh walk realisation."""
    if x < 0.0:
        raise ValueError("x must be >= 0")
    return simulate_path(law, x, rng).count_visits(x)


def count_renewals(law: StepLaw, t: float, rng: RngStream) -> int:
    """nu(t) for a fresh walk realisation (0 for t < 0 by convention)."""
    if t < 0.0:
        return 0
    return simulate_path(law, t, rng).count_renewals(t)


def visit_process(law: StepLaw, n: float, grid, rng: RngStream) -> np.ndarray:
    """One path of (N(n*t)) along the grid, from a single walk realisation."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0.0):
        raise ValueError("grid must be sorted")
    path = simulate_path(law, n * float(grid[-1]), rng)
    # direct counting beats sorting for the short grids used in practice
    t = path.t_values
    return np.asarray([np.count_nonzero(t <= n * g) for g in grid], dtype=np.int64)


# ---------------------------------------------------------------------------
# Monte Carlo property checks
# ---------------------------------------------------------------------------


@dataclass
class PrwReport:
    """Summary of one replicated check; `table` rows are plain dicts."""

    name: str
    table: list
    passed: bool


def verify_lln_uniform(law: StepLaw, n_values, replicates: int, grid, rng: RngStream) -> PrwReport:
    """Distribution of sup_t |m (N(n) - N(n(1-t)-)) / n - t| across replicates.

    Requires E xi < infinity; reports per-n medians, which should decrease.
    Left limits use the strict count.
    """
    m = law.mean_xi()
    if not math.isfinite(m):
        raise ValueError("law has E xi = inf; uniform LLN check needs a finite mean")
    grid = np.asarray(grid, dtype=float)
    rows = []
    for n in n_values:
        stats = np.empty(replicates)
        for r in range(replicates):
            path = simulate_path(law, float(n), rng)
            nn = path.count_visits(float(n))
            sup = 0.0
            for t in grid:
                left = path.count_visits_strict(float(n) * (1.0 - t))
                sup = max(sup, abs(m * (nn - left) / float(n) - t))
            stats[r] = sup
        rows.append({"n": float(n), "median": float(np.median(stats)),
                     "mean": float(np.mean(stats))})
    medians = [row["median"] for row in rows]
    passed = all(b < a for a, b in zip(medians, medians[1:]))
    return PrwReport("lln_uniform", rows, passed)


def _max_window_count(t_sorted: np.ndarray, b: float, n: float) -> int:
    """Exact sup over t in [0,1] of N(nt+b) - N(nt) = #{T in (nt, nt+b]}.

    The supremum over window positions a = nt in [0, n] is attained with a
    just below some point T_i (window [T_i, T_i+b)) or at a = 0; ties have
    probability zero for continuous laws.
    """
    if len(t_sorted) == 0:
        return 0
    best = int(np.searchsorted(t_sorted, b, side="right"))  # a = 0 window (0, b]
    starts = t_sorted[(t_sorted >= 0.0) & (t_sorted <= n)]
    if len(starts):
        lo = np.searchsorted(t_sorted, starts, side="left")
        hi = np.searchsorted(t_sorted, starts + b, side="left")
        best = max(best, int(np.max(hi - lo)))
    return best


def verify_window_growth(law: StepLaw, n_values, b: float, c: float,
                         replicates: int, rng: RngStream) -> PrwReport:
    """Distribution of n**(-c) * sup_t (N(nt+b) - N(nt)); upper quantiles
    should decrease toward zero along n."""
    if b <= 0 or c <= 0:
        raise ValueError("b and c must be > 0")
    rows = []
    for n in n_values:
        stats = np.empty(replicates)
        for r in range(replicates):
            path = simulate_path(law, float(n) + b, rng)
            stats[r] = float(n) ** (-c) * _max_window_count(path._t_sorted, b, float(n))
        rows.append({"n": float(n), "q95": float(np.quantile(stats, 0.95)),
                     "median": float(np.median(stats))})
    qs = [row["q95"] for row in rows]
    passed = all(b_ <= a_ for a_, b_ in zip(qs, qs[1:])) and qs[-1] < qs[0]
    return PrwReport("window_growth", rows, passed)


def verify_visit_increment_bound(law: StepLaw, x_values, y_values,
                                 replicates: int, rng: RngStream) -> PrwReport:
    """Check E(N(x+y) - N(x)) <= E nu(y) + 3 * combined stderr for each pair."""
    rows = []
    passed = True
    for y in y_values:
        inc_by_x = {x: np.empty(replicates) for x in x_values}
        u_vals = np.empty(replicates)
        for r in range(replicates):
            horizon = max(x_values) + y
            path = simulate_path(law, horizon, rng)
            for x in x_values:
                inc_by_x[x][r] = path.count_visits(x + y) - path.count_visits(x)
            u_vals[r] = simulate_path(law, y, rng).count_renewals(y)
        u_mean = float(np.mean(u_vals))
        u_se = float(np.std(u_vals, ddof=1) / math.sqrt(replicates))
        for x in x_values:
            lhs = float(np.mean(inc_by_x[x]))
            lhs_se = float(np.std(inc_by_x[x], ddof=1) / math.sqrt(replicates))
            ok = lhs <= u_mean + 3.0 * math.hypot(lhs_se, u_se)
            passed = passed and ok
            rows.append({"x": float(x), "y": float(y), "lhs": lhs, "u": u_mean,
                         "stderr": math.hypot(lhs_se, u_se), "ok": ok})
    return PrwReport("visit_increment_bound", rows, passed)
