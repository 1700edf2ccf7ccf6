"""Integrands, weight densities and noisy query access.

Every integrand lives on [0, 1]^d and is vectorized: called with an ``(n, d)``
array it returns ``n`` values, called with a single point of shape ``(d,)`` it
returns a float.
"""

from __future__ import annotations

import csv
import datetime as _dt
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import ndtr

from noisybq import oracle
from noisybq.kernel import KernelSpec, as_points, kernel_expansion, kernel_matrix

MAX_BUMPS = 10**6


@dataclass(frozen=True, eq=False)
class Integrand:
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "integrand"
    rkhs_norm_bound: float | None = None
    true_integral: float | None = None
    breakpoints: tuple[float, ...] | None = None
    meta: dict = field(default_factory=dict)

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        single = arr.ndim <= 1 and not (arr.ndim == 1 and self.dim == 1 and arr.size > 1)
        pts = as_points(arr, d=self.dim) if arr.size else np.zeros((0, self.dim))
        if not np.all(np.isfinite(pts)):
            raise ValueError(f"{self.name}: non-finite input")
        out = np.asarray(self.fn(pts), dtype=float).reshape(-1)
        return float(out[0]) if single else out

    def eval(self, x) -> float:
        return float(self(np.asarray(x, dtype=float).reshape(-1)))


@dataclass(frozen=True, eq=False)
class WeightDensity:
    dim: int
    kind: str
    p_max: float
    density_fn: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    params: dict = field(default_factory=dict)

    @property
    def is_uniform(self) -> bool:
        return self.kind == "uniform"

    def density(self, x):
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 0 or (arr.ndim == 1 and self.dim > 1)
        out = self.density_fn(as_points(arr, d=self.dim))
        return float(out[0]) if single else out

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        """One point of shape (d,) or, with ``n``, an (n, d) array."""
        if n is None:
            return self.sampler(rng, 1)[0]
        return self.sampler(rng, n)


def _uniform_sampler(d):
    def sample(rng, n):
        return rng.random((n, d))
    return sample


def make_weight(kind: str = "uniform", params: dict | None = None, d: int = 1) -> WeightDensity:
    """``uniform`` or ``truncated-gaussian`` (params: mean, std; scalars or per-axis)."""
    params = dict(params or {})
    d = int(params.pop("d", d))
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if kind == "uniform":
        if params:
            raise ValueError(f"uniform weight takes no parameters, got {sorted(params)}")
        return WeightDensity(d, "uniform", 1.0, lambda x: np.ones(x.shape[0]), _uniform_sampler(d))
    if kind != "truncated-gaussian":
        raise ValueError(f"unknown weight kind {kind!r}")
    unknown = set(params) - {"mean", "std"}
    if unknown:
        raise ValueError(f"unknown truncated-gaussian parameters {sorted(unknown)}")
    mean = np.broadcast_to(np.asarray(params.get("mean", 0.5), float), (d,)).copy()
    std = np.broadcast_to(np.asarray(params.get("std", 0.25), float), (d,)).copy()
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std)) and np.all(std > 0)):
        raise ValueError("truncated-gaussian needs finite mean and std > 0")
    mass = ndtr((1 - mean) / std) - ndtr(-mean / std)
    if np.any(mass <= 1e-300):
        raise ValueError("truncated-gaussian has no mass on [0, 1]")
    norm = 1.0 / (std * math.sqrt(2 * math.pi) * mass)

    def density(x):
        z = (x - mean) / std
        inside = np.all((x >= 0) & (x <= 1), axis=1)
        return np.where(inside, np.prod(norm * np.exp(-0.5 * z * z), axis=1), 0.0)

    mode = np.clip(mean, 0.0, 1.0)
    p_max = float(density(mode[None, :])[0])

    def sample(rng, n):
        # rejection from the uniform proposal with envelope p_max
        out = np.empty((n, d))
        filled = 0
        while filled < n:
            want = max(16, int(1.2 * (n - filled) * p_max))
            u = rng.random((want, d))
            keep = u[rng.random(want) * p_max < density(u)]
            take = min(n - filled, keep.shape[0])
            out[filled:filled + take] = keep[:take]
            filled += take
        return out

    return WeightDensity(d, kind, p_max, density, sample, {"mean": mean.tolist(), "std": std.tolist()})


class NoisyOracle:
    """Noisy access y = f(x) + N(0, sigma^2) with its own random stream."""

    def __init__(self, integrand: Integrand, sigma: float, rng: np.random.Generator | int | None = None):
        if not (sigma >= 0 and math.isfinite(sigma)):
            raise ValueError("sigma must be finite and >= 0")
        self.integrand = integrand
        self.sigma = float(sigma)
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.n_queries = 0

    @property
    def dim(self) -> int:
        return self.integrand.dim

    def query(self, x) -> float:
        value = self.integrand.eval(x)
        self.n_queries += 1
        if self.sigma == 0.0:
            return value
        return value + self.sigma * float(self.rng.standard_normal())


# --- synthetic RKHS functions -------------------------------------------------

def make_synthetic(d: int, kernel: KernelSpec, rng, m: int | None = None) -> Integrand:
    """Random kernel expansion f(x) = sum_i a_i k(c_i, x), c_i ~ U[0,1]^d, a_i ~ U[-1,1]."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    m = 30 * d if m is None else int(m)
    if m < 0:
        raise ValueError("m must be >= 0")
    centers = rng.random((m, d))
    coef = rng.uniform(-1.0, 1.0, size=m)
    return synthetic_from(kernel, centers, coef)


def synthetic_from(kernel: KernelSpec, centers, coef) -> Integrand:
    centers = np.asarray(centers, dtype=float).reshape(len(coef), -1) if len(coef) else np.zeros((0, 1))
    coef = np.asarray(coef, dtype=float)
    d = centers.shape[1]
    if coef.size == 0:
        return Integrand(d, lambda x: np.zeros(x.shape[0]), "synthetic", 0.0, 0.0, meta={"kernel": kernel, "m": 0})
    norm = math.sqrt(max(float(coef @ kernel_matrix(kernel, centers) @ coef), 0.0))

    def fn(x):
        return kernel_expansion(kernel, centers, coef, x)

    bps = tuple(np.unique(centers[:, 0])) if d == 1 else None
    meta = {"kernel": kernel, "centers": centers, "coef": coef, "m": coef.size}
    return Integrand(d, fn, "synthetic", norm, None, bps, meta)


# --- benchmark functions --------------------------------------------------------

def _ackley(z):
    d = z.shape[1]
    a, b, c = 20.0, 0.2, 2 * math.pi
    s1 = np.sqrt(np.sum(z * z, axis=1) / d)
    s2 = np.sum(np.cos(c * z), axis=1) / d
    return -a * np.exp(-b * s1) - np.exp(s2) + a + math.e


def _alpine(z):
    return np.sum(np.abs(z * np.sin(z) + 0.1 * z), axis=1)


def _gramacy_lee(z):
    x = z[:, 0]
    return np.sin(10 * math.pi * x) / (2 * x) + (x - 1) ** 4


def _griewank(z):
    idx = np.sqrt(np.arange(1, z.shape[1] + 1))
    return 1 + np.sum(z * z, axis=1) / 4000 - np.prod(np.cos(z / idx), axis=1)


def _rastrigin(z):
    return 10 * z.shape[1] + np.sum(z * z - 10 * np.cos(2 * math.pi * z), axis=1)


def _keane(z):
    c = np.cos(z)
    num = np.abs(np.sum(c**4, axis=1) - 2 * np.prod(c * c, axis=1))
    den = np.sqrt(np.sum(np.arange(1, z.shape[1] + 1) * z * z, axis=1))
    safe = np.where(den > 0, den, 1.0)
    return np.where(den > 0, -num / safe, 0.0)


# name -> (function on the native domain, (lo, hi), allowed dims or None)
BENCHMARKS = {
    "ackley": (_ackley, (-32.768, 32.768), None),
    "alpine": (_alpine, (-10.0, 10.0), None),
    "gramacy-lee": (_gramacy_lee, (0.5, 2.5), (1,)),
    "griewank": (_griewank, (-600.0, 600.0), None),
    "rastrigin": (_rastrigin, (-5.12, 5.12), None),
    "keane": (_keane, (0.0, 10.0), None),
}


def make_benchmark(name: str, d: int) -> Integrand:
    """Standard test function, its native box mapped affinely onto [0, 1]^d."""
    key = name.lower().replace("_", "-")
    key = {"alpine01": "alpine", "alpine1": "alpine", "gramacylee": "gramacy-lee"}.get(key, key)
    if key not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}")
    func, (lo, hi), dims = BENCHMARKS[key]
    if d < 1 or (dims is not None and d not in dims):
        raise ValueError(f"benchmark {key!r} is not defined for d={d}")

    def fn(x):
        return func(lo + (hi - lo) * x)

    bps = None
    if key == "alpine" and d == 1:
        # kinks where x sin x + 0.1 x changes sign
        roots = [0.0] + [s * r for s in (-1, 1) for r in _alpine_roots()]
        bps = tuple(sorted((r - lo) / (hi - lo) for r in roots if lo < r < hi))
    return Integrand(d, fn, f"{key}-{d}d", breakpoints=bps, meta={"domain": (lo, hi)})


@lru_cache(maxsize=None)
def _alpine_roots() -> tuple[float, ...]:
    # positive roots of sin x = -0.1 on (0, 10]
    from scipy.optimize import brentq

    g = lambda x: math.sin(x) + 0.1
    grid = np.linspace(1e-6, 10.0, 2001)
    vals = [g(x) for x in grid]
    return tuple(brentq(g, a, b) for a, b, va, vb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]) if va * vb < 0)


# --- hard instances --------------------------------------------------------------

def make_constant(d: int, c: float) -> Integrand:
    c = float(c)
    return Integrand(d, lambda x: np.full(x.shape[0], c), "constant", true_integral=c, meta={"c": c})


def bump_h0(x) -> np.ndarray:
    """exp(-1 / (1 - |x|^2)) inside the unit ball, 0 outside; rows are points."""
    x = as_points(x)
    r2 = np.sum(x * x, axis=1)
    out = np.zeros(x.shape[0])
    inside = r2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


def _multi_indices(d: int, order: int):
    for total in range(order + 1):
        for alpha in itertools.product(range(total + 1), repeat=d):
            if sum(alpha) == total:
                yield alpha


def _poly_derivative(poly: dict, k: int, d: int) -> dict:
    """d/dx_k of P(x, q) e^{-q}, q = 1/(1 - |x|^2), returned as the new P.

    Monomials are keyed by exponent tuples (e_1..e_d, e_q); dq/dx_k = 2 x_k q^2.
    """
    out: dict = {}

    def add(key, val):
        out[key] = out.get(key, 0.0) + val

    for key, c in poly.items():
        if key[k]:
            nk = list(key)
            nk[k] -= 1
            add(tuple(nk), c * key[k])
        # chain rule through q: (dP/dq - P) * 2 x_k q^2
        nk = list(key)
        nk[k] += 1
        nk[d] += 2
        if key[d]:
            nq = list(nk)
            nq[d] -= 1
            add(tuple(nq), 2 * c * key[d])
        add(tuple(nk), -2 * c)
    return {key: c for key, c in out.items() if c != 0.0}


def _eval_poly(poly: dict, x: np.ndarray, d: int) -> np.ndarray:
    r2 = np.sum(x * x, axis=1)
    out = np.zeros(x.shape[0])
    inside = r2 < 1.0
    xi = x[inside]
    q = 1.0 / (1.0 - r2[inside])
    acc = np.zeros(xi.shape[0])
    for key, c in poly.items():
        term = np.full(xi.shape[0], c)
        for k in range(d):
            if key[k]:
                term = term * xi[:, k] ** key[k]
        if key[d]:
            term = term * q ** key[d]
        acc += term
    with np.errstate(over="ignore", invalid="ignore"):
        val = acc * np.exp(-q)
    out[inside] = np.where(q < 700.0, val, 0.0)
    return out


@lru_cache(maxsize=None)
def bump_derivative_norms(d: int, order: int) -> tuple[tuple[tuple[int, ...], float], ...]:
    """Squared L2 norms of every partial derivative of h0 up to ``order``."""
    if d > 3:
        raise ValueError("bump Sobolev calibration is implemented for d <= 3")
    base = {tuple([0] * (d + 1)): 1.0}
    polys = {tuple([0] * d): base}
    results = []
    for alpha in _multi_indices(d, order):
        if alpha not in polys:
            k = max(i for i in range(d) if alpha[i])
            prev = list(alpha)
            prev[k] -= 1
            polys[alpha] = _poly_derivative(polys[tuple(prev)], k, d)
        poly = polys[alpha]

        def sq(x, poly=poly):
            return _eval_poly(poly, x, d) ** 2

        cfg = oracle.OracleConfig(abs_tol=1e-12, points_budget=2 * 10**6)
        res = oracle.integrate_box(sq, -np.ones(d), np.ones(d), cfg)
        results.append((alpha, res.value))
    return tuple(results)


def _sobolev_sums(d: int, s: float) -> tuple[float, float, float]:
    """(S_lo, S_hi, theta) for orders floor(s), ceil(s) and theta = s - floor(s).

    S_j = sum_{|alpha| <= j} 2^{2|alpha| - d} ||d^alpha h0||^2.
    """
    lo = int(math.floor(s + 1e-12))
    theta = max(s - lo, 0.0) if s - lo > 1e-12 else 0.0
    hi = lo + 1 if theta else lo
    norms = bump_derivative_norms(d, hi)

    def total(order):
        return sum(2.0 ** (2 * sum(a) - d) * v for a, v in norms if sum(a) <= order)

    return total(lo), total(hi), theta


@lru_cache(maxsize=None)
def bump_c0(d: int, s: float) -> float:
    """Height constant making the surrogate Sobolev norm of the bump sum <= B.

    For g0(x) = eps/h0(0) h0(2x/w) on a grid with M = w^-d cells, the order-j
    norm of the full sum obeys N_j^2 <= (eps/h0(0))^2 w^{-2j} S_j.  Fractional s
    uses the interpolation bound N_s <= N_lo^{1-theta} N_hi^theta, which scales
    as w^-s = M^{s/d}; eps = B c0 M^{-s/d} then gives N_s <= B.
    """
    s_lo, s_hi, theta = _sobolev_sums(d, s)
    return math.exp(-1.0) / (s_lo ** ((1 - theta) / 2) * s_hi ** (theta / 2))


@dataclass(frozen=True, eq=False)
class BumpClassSpec:
    d: int
    k: int  # bumps per axis
    w: float
    M: int
    eps: float
    signs: np.ndarray
    I0: float
    s: float  # Sobolev order nu + d/2 used for the height calibration
    c0: float

    def center(self, i: int) -> np.ndarray:
        """Center of bump ``i`` (0-based, row-major over the grid)."""
        idx = np.unravel_index(i, (self.k,) * self.d)
        return (np.asarray(idx, dtype=float) + 0.5) * self.w

    def sobolev_norm(self) -> float:
        """Surrogate norm of the bump sum, evaluated at the actual w and eps.

        Integer-order norms are sqrt(M) ||g0||_{W^j}; fractional orders use the
        interpolation bound between the neighbouring integer orders.
        """
        h0 = math.exp(-1.0)
        norms = bump_derivative_norms(self.d, int(math.ceil(self.s - 1e-12)))

        def order_norm(j):
            total = 0.0
            for alpha, val in norms:
                a = sum(alpha)
                if a <= j:
                    total += (self.eps / h0) ** 2 * (2.0 / self.w) ** (2 * a) * (self.w / 2.0) ** self.d * val
            return math.sqrt(self.M * total)

        lo = int(math.floor(self.s + 1e-12))
        theta = self.s - lo if self.s - lo > 1e-12 else 0.0
        if not theta:
            return order_norm(lo)
        return order_norm(lo) ** (1 - theta) * order_norm(lo + 1) ** theta


def make_bump_class(d: int, nu: float, B: float, M_target: int, rng_or_signs=None) -> tuple[Integrand, BumpClassSpec]:
    """Sum of M sign-flipped disjoint bumps on a regular grid of step w."""
    if M_target < 1:
        raise ValueError("M_target must be >= 1")
    if M_target > MAX_BUMPS:
        raise ValueError(f"M_target exceeds the grid-resolution cap {MAX_BUMPS}")
    if B <= 0 or nu <= 0:
        raise ValueError("B and nu must be > 0")
    k = max(1, int(math.floor(M_target ** (1.0 / d))))
    while k**d < M_target:
        k += 1
    while k > 1 and (k - 1) ** d >= M_target:
        k -= 1
    M = k**d
    w = 1.0 / k
    s = nu + d / 2
    c0 = bump_c0(d, s)
    eps = B * c0 * M ** (-nu / d - 0.5)

    if isinstance(rng_or_signs, (list, tuple, np.ndarray)):
        signs = np.asarray(rng_or_signs, dtype=float)
        if signs.shape != (M,) or not np.all(np.abs(signs) == 1):
            raise ValueError(f"signs must be a length-{M} vector of +-1")
    else:
        rng = rng_or_signs if isinstance(rng_or_signs, np.random.Generator) else np.random.default_rng(rng_or_signs)
        signs = rng.choice([-1.0, 1.0], size=M)
    signs = signs.copy()
    signs.setflags(write=False)

    # per-bump integral over the bump's bounding box, then scaled from the unit ball
    unit = oracle.integrate_box(bump_h0, -np.ones(d), np.ones(d), oracle.OracleConfig(abs_tol=1e-14))
    I0 = eps / math.exp(-1.0) * (w / 2.0) ** d * unit.value
    spec = BumpClassSpec(d, k, w, M, eps, signs, I0, s, c0)

    def fn(x):
        cell = np.clip(np.floor(x / w).astype(int), 0, k - 1)
        local = (x - (cell + 0.5) * w) * (2.0 / w)
        flat = np.ravel_multi_index(tuple(cell.T), (k,) * d)
        return signs[flat] * (eps / math.exp(-1.0)) * bump_h0(local)

    bps = tuple(np.arange(1, k) * w)
    f = Integrand(d, fn, "bump", true_integral=float(I0 * signs.sum()), breakpoints=bps, meta={"bump": spec})
    return f, spec


@dataclass(frozen=True, eq=False)
class SignGame:
    M: int
    eps: float
    sigma: float
    signs: np.ndarray
    I0: float

    @classmethod
    def from_bumps(cls, spec: BumpClassSpec, sigma: float) -> SignGame:
        return cls(spec.M, spec.eps, sigma, spec.signs, spec.I0)

    @property
    def target(self) -> float:
        return float(self.I0 * np.sum(self.signs))

    def query(self, i: int, rng: np.random.Generator) -> float:
        return sign_game_query(self, i, rng)


def sign_game_query(game: SignGame, i: int, rng: np.random.Generator) -> float:
    """Observe eps * S_i + N(0, sigma^2); ``i`` runs from 1 to M."""
    if not 1 <= i <= game.M:
        raise IndexError(f"sign-game index {i} outside 1..{game.M}")
    value = game.eps * float(game.signs[i - 1])
    if game.sigma == 0:
        return value
    return value + game.sigma * float(rng.standard_normal())


# --- sensor series ---------------------------------------------------------------

class SensorParseError(ValueError):
    pass


def _parse_stamp(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    stamp = _dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    if stamp.tzinfo is not None:
        stamp = stamp.astimezone(_dt.timezone.utc).replace(tzinfo=None)
    return stamp


def read_sensor_csv(path) -> tuple[list, np.ndarray]:
    stamps, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 2:
                raise SensorParseError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                stamp = _parse_stamp(row[0])
                value = float(row[1])
            except ValueError as exc:
                if lineno == 1 and not stamps:
                    continue  # header
                raise SensorParseError(f"{path}:{lineno}: cannot parse row {row!r}") from exc
            if not math.isfinite(value):
                raise SensorParseError(f"{path}:{lineno}: non-finite value")
            stamps.append(stamp)
            values.append(value)
    if not values:
        raise SensorParseError(f"{path}: no data rows")
    kinds = {type(s) for s in stamps}
    if len(kinds) > 1:
        raise SensorParseError(f"{path}: mixed timestamp and index rows")
    return stamps, np.asarray(values)


def _hourly(stamps: list, values: np.ndarray) -> np.ndarray:
    """First reading in each hour, if any two readings share an hour."""
    if not isinstance(stamps[0], _dt.datetime):
        return values
    hours = [s.replace(minute=0, second=0, microsecond=0) for s in stamps]
    if len(set(hours)) == len(hours):
        return values
    order = sorted(range(len(stamps)), key=lambda i: stamps[i])
    out, seen = [], set()
    for i in order:
        if hours[i] not in seen:
            seen.add(hours[i])
            out.append(values[i])
    return np.asarray(out)


def sensor_integrand(series) -> Integrand:
    series = np.asarray(series, dtype=float).reshape(-1)
    if series.size == 0:
        raise ValueError("empty series")
    n = series.size

    def fn(x):
        idx = np.minimum(np.floor(x[:, 0] * n).astype(int), n - 1)
        return series[np.maximum(idx, 0)]

    bps = tuple(np.arange(1, n) / n) if n <= 10**5 else None
    return Integrand(1, fn, "sensor", true_integral=float(series.mean()), breakpoints=bps, meta={"n": n})


def load_sensor_series(path) -> Integrand:
    """Step function over [0, 1]: x reads the series at index floor(x * n)."""
    stamps, values = read_sensor_csv(path)
    return sensor_integrand(_hourly(stamps, values))


# --- spec strings -----------------------------------------------------------------

def _kv(text: str) -> dict:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ValueError(f"expected key=value, got {part!r}")
        key, val = part.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def parse_integrand(text: str) -> Integrand:
    """Build an integrand from a spec string.

    ``benchmark:<name>:<d>``, ``synthetic:d=1,seed=0[,m=..,nu=..,l=..,scale=..]``,
    ``constant:<c>[:<d>]``, ``bump:d=1,M=8,seed=0[,nu=..,B=..]``, ``sensor:<path>``.
    """
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind == "benchmark":
        name, _, d = rest.partition(":")
        return make_benchmark(name, int(d or 1))
    if kind == "constant":
        c, _, d = rest.partition(":")
        return make_constant(int(d or 1), float(c))
    if kind == "sensor":
        return load_sensor_series(rest)
    if kind == "synthetic":
        kv = _kv(rest)
        d = int(kv.pop("d", 1))
        spec = KernelSpec(float(kv.pop("nu", 1.5)), float(kv.pop("l", 0.03)), float(kv.pop("scale", 2.0)))
        m = int(kv.pop("m", 30 * d))
        seed = int(kv.pop("seed", 0))
        if kv:
            raise ValueError(f"unknown synthetic options {sorted(kv)}")
        return make_synthetic(d, spec, np.random.default_rng(seed), m)
    if kind == "bump":
        kv = _kv(rest)
        d = int(kv.pop("d", 1))
        f, _ = make_bump_class(
            d, float(kv.pop("nu", 1.5)), float(kv.pop("B", 1.0)), int(kv.pop("M", 8)),
            np.random.default_rng(int(kv.pop("seed", 0))),
        )
        if kv:
            raise ValueError(f"unknown bump options {sorted(kv)}")
        return f
    raise ValueError(f"unknown integrand kind {kind!r}")
