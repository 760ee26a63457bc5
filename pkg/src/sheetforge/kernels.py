"""Deterministic Volterra-type kernels K(t, r) on [0,1]^2 and their
L2-increment geometry.

Supported families (all vanish for r >= t and for t = 0):

* FbmVolterra(alpha): the square-integrable kernel representing fractional
  Brownian motion of index alpha as a Wiener integral,

      K(t, r) = c_a (t-r)^(alpha-1/2)
              + c_a (1/2-alpha) * int_r^t (u-r)^(alpha-3/2) (1-(r/u)^(1/2-alpha)) du

  for 0 < r < t, with c_a = volterra_constant(alpha). Its increments obey
  the exact identity int_0^1 (K(s',r)-K(s,r))^2 dr = (s'-s)^(2 alpha).
* Indicator: K(t, r) = 1 for 0 < r < t — the Brownian case.
* HolmgrenRL(h): K(t, r) = sqrt(2 pi) (t-r)^(h-1/2), 0 < h < 1.
* Goursat(terms): sum_i g_i(t) h_i(r) with polynomial factors.
* LipschitzDiff(xs, ys): K(t, r) = h(t-r) for a piecewise-linear table h.

The singular inner integral of FbmVolterra uses the substitution
u = r + v^2 (making the integrand bounded) followed by Gauss-Legendre on
dyadic panels accumulating at v = 0; absolute target 1e-8.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import gamma as _gamma

from .errors import ConfigError, OutOfRange, ProfileViolation, QuadratureFailure
from .quadrature import depth_for_power, dyadic_unit_nodes, graded_nodes

__all__ = [
    "FbmVolterra",
    "Indicator",
    "HolmgrenRL",
    "Goursat",
    "LipschitzDiff",
    "KernelSpec",
    "volterra_constant",
    "eval_kernel",
    "kernel_row",
    "kernel_matrix",
    "increment_l2",
    "windowed_increment_l2",
    "l2_quadrature_nodes",
    "GrowthFunction",
    "IncrementProfile",
    "default_profile",
    "fit_window_profile",
    "check_profile",
    "ProfileReport",
]

_INNER_TOL = 1e-8
_INNER_ORDER = 12
_OUTER_TOL = 1e-9
_OUTER_ORDER = 12


def volterra_constant(alpha: float) -> float:
    """Normalizing constant of the fBm Volterra kernel:

        ( 2 alpha Gamma(3/2-alpha) / (Gamma(alpha+1/2) Gamma(2-2 alpha)) )^(1/2)

    Equals 1 at alpha = 1/2. Defined for 0 < alpha < 1 only.
    """
    if not (0.0 < alpha < 1.0):
        raise OutOfRange(f"alpha={alpha} must lie in (0, 1)")
    num = 2.0 * alpha * _gamma(1.5 - alpha)
    den = _gamma(alpha + 0.5) * _gamma(2.0 - 2.0 * alpha)
    return math.sqrt(num / den)


@dataclass(frozen=True)
class FbmVolterra:
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise OutOfRange(f"alpha={self.alpha} must lie in (0, 1)")

    def to_json_obj(self) -> dict:
        return {"kind": "fbm_volterra", "alpha": self.alpha}


@dataclass(frozen=True)
class Indicator:
    def to_json_obj(self) -> dict:
        return {"kind": "indicator"}


@dataclass(frozen=True)
class HolmgrenRL:
    h: float

    def __post_init__(self):
        if not (0.0 < self.h < 1.0):
            raise OutOfRange(f"h={self.h} must lie in (0, 1)")

    def to_json_obj(self) -> dict:
        return {"kind": "holmgren_rl", "h": self.h}


@dataclass(frozen=True)
class Goursat:
    """K(t, r) = sum_i g_i(t) h_i(r); each factor is a polynomial given by
    ascending coefficient tuples."""

    terms: Tuple[Tuple[Tuple[float, ...], Tuple[float, ...]], ...]

    def __post_init__(self):
        if not self.terms:
            raise OutOfRange("Goursat kernel needs at least one (g, h) term")
        norm = []
        for g, h in self.terms:
            g = tuple(float(c) for c in g)
            h = tuple(float(c) for c in h)
            if not g or not h:
                raise OutOfRange("Goursat polynomial coefficient tuples must be nonempty")
            if not all(math.isfinite(c) for c in g + h):
                raise OutOfRange("Goursat coefficients must be finite")
            norm.append((g, h))
        object.__setattr__(self, "terms", tuple(norm))

    def to_json_obj(self) -> dict:
        return {"kind": "goursat", "terms": [[list(g), list(h)] for g, h in self.terms]}


@dataclass(frozen=True)
class LipschitzDiff:
    """K(t, r) = h(t - r) with h piecewise linear through (xs, ys); the table
    must cover [0, 1]."""

    xs: Tuple[float, ...]
    ys: Tuple[float, ...]

    def __post_init__(self):
        xs = tuple(float(x) for x in self.xs)
        ys = tuple(float(y) for y in self.ys)
        if len(xs) != len(ys) or len(xs) < 2:
            raise OutOfRange("LipschitzDiff table needs matching xs/ys, length >= 2")
        if any(x2 <= x1 for x1, x2 in zip(xs, xs[1:])):
            raise OutOfRange("LipschitzDiff xs must be strictly increasing")
        if not all(math.isfinite(v) for v in xs + ys):
            raise OutOfRange("LipschitzDiff table must be finite")
        if xs[0] > 0.0 or xs[-1] < 1.0:
            raise OutOfRange("LipschitzDiff table must cover [0, 1]")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def to_json_obj(self) -> dict:
        return {"kind": "lipschitz_diff", "xs": list(self.xs), "ys": list(self.ys)}


KernelSpec = Union[FbmVolterra, Indicator, HolmgrenRL, Goursat, LipschitzDiff]

_KERNEL_KINDS = {
    "fbm_volterra": lambda o: FbmVolterra(alpha=float(o["alpha"])),
    "indicator": lambda o: Indicator(),
    "holmgren_rl": lambda o: HolmgrenRL(h=float(o["h"])),
    "goursat": lambda o: Goursat(
        terms=tuple((tuple(g), tuple(h)) for g, h in o["terms"])
    ),
    "lipschitz_diff": lambda o: LipschitzDiff(xs=tuple(o["xs"]), ys=tuple(o["ys"])),
}

_KERNEL_FIELDS = {
    "fbm_volterra": {"alpha"},
    "indicator": set(),
    "holmgren_rl": {"h"},
    "goursat": {"terms"},
    "lipschitz_diff": {"xs", "ys"},
}


def kernel_from_json_obj(obj: dict) -> KernelSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError("kernel must be an object with a 'kind' field")
    kind = obj["kind"]
    if kind not in _KERNEL_KINDS:
        raise ConfigError(f"unknown kernel kind {kind!r}")
    extra = set(obj) - {"kind"} - _KERNEL_FIELDS[kind]
    if extra:
        raise ConfigError(f"unknown kernel fields for {kind!r}: {sorted(extra)}")
    try:
        return _KERNEL_KINDS[kind](obj)
    except KeyError as exc:
        raise ConfigError(f"kernel {kind!r} missing field {exc}") from exc


# -- evaluation -----------------------------------------------------------


def _fbm_inner_depth(alpha: float, r_min: float) -> int:
    """Dyadic depth (in the normalized variable w) so the stub truncation of
    the inner integral is below _INNER_TOL/2. The integrand is bounded by
    2 |alpha-1/2| w^(2 alpha) / r near 0 (V <= 1)."""
    scale = 2.0 * abs(alpha - 0.5) / max(r_min, 1e-300)
    return depth_for_power(2.0 * alpha, 0.5 * _INNER_TOL, scale)


def _fbm_inner(alpha: float, t: float, r: np.ndarray) -> np.ndarray:
    """int_r^t (u-r)^(alpha-3/2) (1 - (r/u)^(1/2-alpha)) du for 0 < r < t.

    After u = r + (V w)^2 with V = sqrt(t-r):

        2 V^(2 alpha - 1) * int_0^1 w^(2 alpha - 2) (1 - (r/(r + V^2 w^2))^(1/2-alpha)) dw

    whose integrand is bounded at w = 0 for every alpha in (0, 1).
    """
    V = np.sqrt(t - r)
    depth = _fbm_inner_depth(alpha, float(r.min()))
    w, om = dyadic_unit_nodes(depth, _INNER_ORDER)
    rr = r[:, None]
    vw2 = (V * V)[:, None] * (w * w)[None, :]
    g = 1.0 - (rr / (rr + vw2)) ** (0.5 - alpha)
    vals = w[None, :] ** (2.0 * alpha - 2.0) * g
    return 2.0 * V ** (2.0 * alpha - 1.0) * np.sum(vals * om[None, :], axis=-1)


def _polyval_asc(coeffs: Sequence[float], x: np.ndarray) -> np.ndarray:
    return np.polynomial.polynomial.polyval(x, np.asarray(coeffs, dtype=float))


def kernel_row(spec: KernelSpec, t: float, r: np.ndarray) -> np.ndarray:
    """K(t, r) for an array of r values. eval_kernel and kernel_matrix both
    route through this function, so matrix rows are bit-identical to row
    evaluation on the same r array (the fractional family adapts its inner
    quadrature depth to the smallest r in the batch, so evaluations on
    different batches agree only to quadrature accuracy)."""
    if not (0.0 <= t <= 1.0):
        raise OutOfRange(f"t={t} must lie in [0, 1]")
    r = np.asarray(r, dtype=float)
    if r.ndim != 1:
        raise OutOfRange("r must be one-dimensional")
    if r.size and (r.min() < 0.0 or r.max() > 1.0):
        raise OutOfRange("r values must lie in [0, 1]")
    out = np.zeros_like(r)
    mask = (r > 0.0) & (r < t)
    if isinstance(spec, Indicator):
        out[mask] = 1.0
        return out
    if not mask.any():
        return out
    rr = r[mask]
    if isinstance(spec, FbmVolterra):
        alpha = spec.alpha
        c = volterra_constant(alpha)
        vals = c * (t - rr) ** (alpha - 0.5)
        if alpha != 0.5:
            vals = vals + c * (0.5 - alpha) * _fbm_inner(alpha, t, rr)
        out[mask] = vals
    elif isinstance(spec, HolmgrenRL):
        out[mask] = math.sqrt(2.0 * math.pi) * (t - rr) ** (spec.h - 0.5)
    elif isinstance(spec, Goursat):
        acc = np.zeros_like(rr)
        for g, h in spec.terms:
            acc += _polyval_asc(g, np.array(t)) * _polyval_asc(h, rr)
        out[mask] = acc
    elif isinstance(spec, LipschitzDiff):
        out[mask] = np.interp(t - rr, spec.xs, spec.ys)
    else:
        raise OutOfRange(f"unsupported kernel spec {type(spec).__name__}")
    return out


def eval_kernel(spec: KernelSpec, t: float, r: float) -> float:
    """Pointwise K(t, r); 0 whenever r <= 0, r >= t, or t = 0."""
    if not (0.0 <= r <= 1.0):
        raise OutOfRange(f"r={r} must lie in [0, 1]")
    return float(kernel_row(spec, t, np.array([r]))[0])


def kernel_matrix(spec: KernelSpec, ts: Sequence[float], rs: np.ndarray) -> np.ndarray:
    """Matrix [K(t_k, r_i)]; row k is exactly kernel_row(spec, t_k, rs)."""
    rs = np.asarray(rs, dtype=float)
    return np.array([kernel_row(spec, float(t), rs) for t in ts])


# -- L2 increment geometry ------------------------------------------------


def _singular_power(spec: KernelSpec) -> float | None:
    """Exponent p such that K(t, r)^2 ~ C x^p near its singular endpoints
    (x the distance to the endpoint); None when the kernel is bounded."""
    if isinstance(spec, FbmVolterra):
        if spec.alpha == 0.5:
            return None
        return 2.0 * spec.alpha - 1.0
    if isinstance(spec, HolmgrenRL):
        return 2.0 * spec.h - 1.0
    return None


def _l2_nodes(spec: KernelSpec, breaks: Sequence[float], order: int):
    """Quadrature nodes/weights on [0, max(breaks)] split at every break
    point, graded toward panel ends when the kernel family is singular."""
    pts = sorted({b for b in breaks if b > 0.0})
    power = _singular_power(spec)
    if power is None:
        depth, grade = 2, False
    else:
        # integrand of int (dK)^2 behaves like x^power at the worst endpoint
        depth = depth_for_power(power, _OUTER_TOL, scale=4.0)
        grade = True
    nodes, wts = [], []
    lo = 0.0
    for hi in pts:
        n_, w_ = graded_nodes(lo, hi, depth, order, grade_left=grade, grade_right=grade)
        nodes.append(n_)
        wts.append(w_)
        lo = hi
    return np.concatenate(nodes), np.concatenate(wts)


def l2_quadrature_nodes(
    spec: KernelSpec, breaks: Sequence[float], order: int = _OUTER_ORDER
):
    """Public access to the graded node/weight sets used for all L2
    integrals of a kernel family (also serves the covariance quadrature
    route)."""
    return _l2_nodes(spec, breaks, order)


def increment_l2(spec: KernelSpec, s: float, s2: float, quad_points: int = _OUTER_ORDER) -> float:
    """int_0^1 (K(s2, r) - K(s, r))^2 dr for 0 <= s <= s2 <= 1.

    For FbmVolterra(alpha) this equals |s2 - s|^(2 alpha) exactly; the
    quadrature is graded at the integrable singularities r -> 0, s, s2.
    """
    if not (0.0 <= s <= s2 <= 1.0):
        raise OutOfRange(f"need 0 <= s <= s2 <= 1, got s={s}, s2={s2}")
    if s == s2:
        return 0.0
    nodes, wts = _l2_nodes(spec, (s, s2), quad_points)
    diff = kernel_row(spec, s2, nodes) - kernel_row(spec, s, nodes)
    return float(np.sum(diff * diff * wts))


def windowed_increment_l2(
    spec: KernelSpec, s: float, s2: float, r_lo: float, r_hi: float,
    quad_points: int = _OUTER_ORDER,
) -> float:
    """int_{r_lo}^{r_hi} (K(s2, r) - K(s, r))^2 dr."""
    if not (0.0 <= s <= s2 <= 1.0):
        raise OutOfRange(f"need 0 <= s <= s2 <= 1, got s={s}, s2={s2}")
    if not (0.0 <= r_lo <= r_hi <= 1.0):
        raise OutOfRange(f"window [{r_lo}, {r_hi}] must lie inside [0, 1]")
    if s == s2 or r_lo == r_hi:
        return 0.0
    nodes, wts = _l2_nodes(spec, (s, s2, r_lo, r_hi), quad_points)
    keep = (nodes >= r_lo) & (nodes <= r_hi)
    nodes, wts = nodes[keep], wts[keep]
    if nodes.size == 0:
        return 0.0
    diff = kernel_row(spec, s2, nodes) - kernel_row(spec, s, nodes)
    return float(np.sum(diff * diff * wts))


# -- growth profiles ------------------------------------------------------


@dataclass(frozen=True)
class GrowthFunction:
    """Monotone comparison function G for increment profiles: G(s) = scale * s^power."""

    scale: float = 1.0
    power: float = 1.0

    def __post_init__(self):
        if self.scale <= 0 or self.power <= 0:
            raise OutOfRange("GrowthFunction needs scale > 0 and power > 0")

    def __call__(self, s: float) -> float:
        return self.scale * float(s) ** self.power

    def to_json_obj(self) -> dict:
        return {"scale": self.scale, "power": self.power}


@dataclass(frozen=True)
class IncrementProfile:
    """Declared growth of squared kernel increments.

    regime "superlinear": int (dK)^2 <= (G(s2)-G(s))^exponent with
    exponent > 1 — strong enough on its own.
    regime "windowed": same bound with exponent in (0, 1], plus the localized
    condition int_{r0}^{r0'} (dK)^2 dr <= m_bound * (r0'-r0)^beta for every
    pair and window.
    """

    regime: str
    g: GrowthFunction
    exponent: float
    m_bound: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.regime not in ("superlinear", "windowed"):
            raise OutOfRange(f"unknown profile regime {self.regime!r}")
        if self.regime == "superlinear" and not self.exponent > 1.0:
            raise OutOfRange("superlinear profile requires exponent > 1")
        if self.regime == "windowed":
            if not (0.0 < self.exponent <= 1.0):
                raise OutOfRange("windowed profile requires exponent in (0, 1]")
            if (self.m_bound is None) != (self.beta is None):
                raise OutOfRange("windowed profile needs both m_bound and beta (or neither)")
            if self.beta is not None and self.beta <= 0:
                raise OutOfRange("windowed profile beta must be > 0")

    def to_json_obj(self) -> dict:
        return {
            "regime": self.regime,
            "g": self.g.to_json_obj(),
            "exponent": self.exponent,
            "m_bound": self.m_bound,
            "beta": self.beta,
        }


def default_profile(spec: KernelSpec) -> IncrementProfile:
    """The natural profile of each family; windowed constants (m_bound, beta)
    are left unset and are fitted empirically when needed."""
    if isinstance(spec, FbmVolterra):
        if spec.alpha > 0.5:
            return IncrementProfile("superlinear", GrowthFunction(), 2.0 * spec.alpha)
        return IncrementProfile("windowed", GrowthFunction(), 2.0 * spec.alpha)
    if isinstance(spec, Indicator):
        return IncrementProfile("windowed", GrowthFunction(), 1.0)
    if isinstance(spec, HolmgrenRL):
        # squared increments scale like (s2-s)^(2h) near the diagonal
        if spec.h > 0.5:
            return IncrementProfile("superlinear", GrowthFunction(), 2.0 * spec.h)
        return IncrementProfile("windowed", GrowthFunction(), 2.0 * spec.h)
    # Goursat / LipschitzDiff: Lipschitz factors give squared increments
    # O((s2-s)^1); declare windowed with exponent 1 by default.
    return IncrementProfile("windowed", GrowthFunction(), 1.0)


def fit_window_profile(
    spec: KernelSpec,
    pairs: Sequence[Tuple[float, float]],
    windows: Sequence[Tuple[float, float]],
    quad_points: int = _OUTER_ORDER,
) -> Tuple[float, float]:
    """Empirical (m_bound, beta) for the windowed condition: fit the envelope
    of log(windowed integral) against log(window length) across all supplied
    pairs and windows, then set m_bound as the max observed ratio to the
    fitted power. Returns (m_bound, beta)."""
    lens, vals = [], []
    for (s, s2) in pairs:
        for (r_lo, r_hi) in windows:
            v = windowed_increment_l2(spec, s, s2, r_lo, r_hi, quad_points)
            if v > 0.0:
                lens.append(r_hi - r_lo)
                vals.append(v)
    if len(vals) < 2:
        raise OutOfRange("need at least two nonzero windowed integrals to fit")
    lens = np.array(lens)
    vals = np.array(vals)
    # envelope slope: regress the per-length maxima so interior windows do
    # not drag beta below the worst case
    order = np.argsort(lens)
    lens, vals = lens[order], vals[order]
    uniq: dict = {}
    for ln, v in zip(lens, vals):
        uniq[ln] = max(uniq.get(ln, 0.0), v)
    xs = np.log(np.array(sorted(uniq)))
    ys = np.log(np.array([uniq[k] for k in sorted(uniq)]))
    if len(xs) < 2:
        raise OutOfRange("windows must span at least two distinct lengths")
    beta = float(np.polyfit(xs, ys, 1)[0])
    beta = max(beta, 1e-6)
    m_bound = float(np.max(vals / lens**beta))
    return m_bound, beta


@dataclass
class ProfileReport:
    """Outcome of check_profile: worst slack (bound - value, negative means
    violation before tolerance) and the pair/window achieving it."""

    regime: str
    worst_slack: float
    worst_pair: Tuple[float, float]
    worst_window: Tuple[float, float] | None
    checked_pairs: int
    checked_windows: int

    def to_json_obj(self) -> dict:
        return {
            "regime": self.regime,
            "worst_slack": self.worst_slack,
            "worst_pair": list(self.worst_pair),
            "worst_window": list(self.worst_window) if self.worst_window else None,
            "checked_pairs": self.checked_pairs,
            "checked_windows": self.checked_windows,
        }


def check_profile(
    spec: KernelSpec,
    profile: IncrementProfile,
    pairs: Sequence[Tuple[float, float]],
    windows: Sequence[Tuple[float, float]] = (),
    rel_tol: float = 5e-3,
    quad_points: int = _OUTER_ORDER,
) -> ProfileReport:
    """Verify the declared profile on a grid of pairs (and windows for the
    windowed regime). Raises ProfileViolation on the first bound exceeded by
    more than rel_tol (relative, to absorb quadrature error)."""
    if not pairs:
        raise OutOfRange("need at least one (s, s2) pair")
    worst = math.inf
    worst_pair = pairs[0]
    worst_window = None
    for (s, s2) in pairs:
        if not (0.0 <= s < s2 <= 1.0):
            raise OutOfRange(f"bad pair ({s}, {s2})")
        value = increment_l2(spec, s, s2, quad_points)
        bound = (profile.g(s2) - profile.g(s)) ** profile.exponent
        slack = bound - value
        if value > bound * (1.0 + rel_tol) + 1e-12:
            raise ProfileViolation(
                f"squared-increment bound violated at (s={s}, s2={s2}): "
                f"value={value:.6g} > bound={bound:.6g}",
                pair=(s, s2), value=value, bound=bound,
            )
        if slack < worst:
            worst, worst_pair, worst_window = slack, (s, s2), None
    n_windows = 0
    if profile.regime == "windowed" and profile.m_bound is not None:
        for (s, s2) in pairs:
            for (r_lo, r_hi) in windows:
                n_windows += 1
                value = windowed_increment_l2(spec, s, s2, r_lo, r_hi, quad_points)
                bound = profile.m_bound * (r_hi - r_lo) ** profile.beta
                slack = bound - value
                if value > bound * (1.0 + rel_tol) + 1e-12:
                    raise ProfileViolation(
                        f"windowed bound violated at (s={s}, s2={s2}), "
                        f"window [{r_lo}, {r_hi}]: value={value:.6g} > bound={bound:.6g}",
                        pair=(s, s2), window=(r_lo, r_hi), value=value, bound=bound,
                    )
                if slack < worst:
                    worst, worst_pair, worst_window = slack, (s, s2), (r_lo, r_hi)
    return ProfileReport(
        regime=profile.regime,
        worst_slack=float(worst),
        worst_pair=worst_pair,
        worst_window=worst_window,
        checked_pairs=len(pairs),
        checked_windows=n_windows,
    )
