"""Monte Carlo verification layer: covariance convergence against the
factorized limit, Gaussianity at a point, independence of the coupled
cos/sin pair, and the two numeric hypothesis probes (bilinear moment bound
and window scaling).

Determinism contract: every probe is a pure function of (master_seed,
parameters). Replicate r always uses the derived seed mix64(master_seed, r),
results land in per-replicate slots, and reductions run in replicate order,
so thread count (SHEETFORGE_THREADS or the workers argument) affects speed
only, never values.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats as _scipy_stats

from .approx import EvalGrid, quadrature_rows
from .errors import (
    InsufficientReplicates,
    OutOfRange,
    QuadratureFailure,
    UncoupledInputs,
)
from .kernels import (
    FbmVolterra,
    Indicator,
    KernelSpec,
    kernel_row,
    l2_quadrature_nodes,
)
from .levy import exponent, normalizing_constant
from .sheet import Lattice, mix64, simulate_sheet
from .theta import ThetaSpec, theta_values_from_sheet

__all__ = [
    "MomentEstimate",
    "CovarianceReport",
    "StepFunction",
    "ReplicateSet",
    "grid_points",
    "axis_inner_product",
    "theoretical_covariance",
    "empirical_covariance",
    "generate_replicates",
    "generate_coupled_replicates",
    "bilinear_moment_probe",
    "BilinearProbeReport",
    "window_scaling_probe",
    "WindowScalingReport",
    "gaussianity_test",
    "GaussianityReport",
    "independence_probe",
    "IndependenceReport",
    "default_zero_mean",
]

_PSD_TOL = 1e-8


def _worker_count(workers: Optional[int]) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("SHEETFORGE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            return 1
    return 1


def _run_replicates(count: int, work, workers: Optional[int]) -> None:
    """Run work(r) for r = 0..count-1, optionally on a thread pool. Each
    work(r) writes only to its own slot, so scheduling never changes
    results."""
    n = _worker_count(workers)
    if n == 1:
        for r in range(count):
            work(r)
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            list(pool.map(work, range(count)))


@dataclass(frozen=True)
class MomentEstimate:
    """A Monte Carlo estimate: value, standard error (sample sd / sqrt(R)),
    and the replicate count."""

    value: float
    std_error: float
    replicates: int

    def __post_init__(self):
        if self.replicates < 2:
            raise InsufficientReplicates(
                f"need at least 2 replicates, got {self.replicates}"
            )
        if not (self.std_error >= 0.0):
            raise OutOfRange(f"std_error={self.std_error} must be nonnegative")

    def to_json_obj(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "replicates": self.replicates,
        }


def grid_points(grid: EvalGrid) -> Tuple[Tuple[float, float], ...]:
    """Flatten an evaluation grid to (s, t) points, row-major in s."""
    return tuple((s, t) for s in grid.s_points for t in grid.t_points)


# -- theoretical covariance -------------------------------------------------


def axis_inner_product(
    spec: KernelSpec, s: float, s2: float, method: str = "auto"
) -> float:
    """One-axis factor int_0^1 K(s, u) K(s2, u) du of the limit covariance.

    Closed forms: Indicator -> min(s, s2); FbmVolterra(alpha) ->
    (s^2a + s2^2a - |s2-s|^2a)/2 with a = alpha. method="quadrature" forces
    the numeric route (self-consistency oracle); "auto" prefers closed forms.
    """
    if method not in ("auto", "closed", "quadrature"):
        raise OutOfRange(f"unknown method {method!r}")
    if not (0.0 <= s <= 1.0 and 0.0 <= s2 <= 1.0):
        raise OutOfRange("points must lie in [0, 1]")
    if method != "quadrature":
        if isinstance(spec, Indicator):
            return min(s, s2)
        if isinstance(spec, FbmVolterra):
            two_a = 2.0 * spec.alpha
            return 0.5 * (s**two_a + s2**two_a - abs(s2 - s) ** two_a)
        if method == "closed":
            raise OutOfRange(f"no closed form for {type(spec).__name__}")
    lo = min(s, s2)
    if lo == 0.0:
        return 0.0
    nodes, wts = l2_quadrature_nodes(spec, (lo,))
    vals = kernel_row(spec, s, nodes) * kernel_row(spec, s2, nodes)
    return float(np.sum(vals * wts))


def theoretical_covariance(
    k1: KernelSpec,
    k2: KernelSpec,
    points: Sequence[Tuple[float, float]],
    method: str = "auto",
) -> np.ndarray:
    """Limit covariance matrix over the points: the per-axis inner products
    multiply, Cov[p, q] = (int K1(s_p,.) K1(s_q,.)) * (int K2(t_p,.) K2(t_q,.)).
    The result must be positive semidefinite (min eigenvalue >= -1e-8)."""
    pts = [(float(s), float(t)) for s, t in points]
    svals = sorted({s for s, _ in pts})
    tvals = sorted({t for _, t in pts})
    f1 = {
        (a, b): axis_inner_product(k1, a, b, method)
        for i, a in enumerate(svals)
        for b in svals[i:]
    }
    f2 = {
        (a, b): axis_inner_product(k2, a, b, method)
        for i, a in enumerate(tvals)
        for b in tvals[i:]
    }

    def look(table, a, b):
        return table[(a, b)] if a <= b else table[(b, a)]

    n = len(pts)
    cov = np.empty((n, n))
    for i, (s, t) in enumerate(pts):
        for j in range(i, n):
            s2, t2 = pts[j]
            cov[i, j] = cov[j, i] = look(f1, s, s2) * look(f2, t, t2)
    if n:
        min_eig = float(np.linalg.eigvalsh(cov)[0])
        if min_eig < -_PSD_TOL:
            raise QuadratureFailure(
                f"covariance matrix not PSD: min eigenvalue {min_eig:.3e}"
            )
    return cov


# -- empirical covariance ---------------------------------------------------


@dataclass
class CovarianceReport:
    """Empirical vs theoretical covariance over a point set, with per-entry
    standard errors. Both matrices are symmetric by construction."""

    points: Tuple[Tuple[float, float], ...]
    empirical: np.ndarray
    std_errors: np.ndarray
    theoretical: np.ndarray
    replicates: int
    zero_mean: bool

    def entry(self, i: int, j: int) -> MomentEstimate:
        return MomentEstimate(
            float(self.empirical[i, j]),
            float(self.std_errors[i, j]),
            self.replicates,
        )

    @property
    def deviations(self) -> np.ndarray:
        return self.empirical - self.theoretical

    @property
    def max_abs_deviation(self) -> float:
        return float(np.max(np.abs(self.deviations)))

    @property
    def max_std_deviation(self) -> float:
        dev = np.abs(self.deviations)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dev == 0.0, 0.0, dev / self.std_errors)
        return float(np.max(ratio))

    def worst_entry(self, se_mult: float = 5.0, floor: float = 0.0):
        """Index pair maximizing |deviation| / max(se_mult*SE, floor)."""
        allow = np.maximum(se_mult * self.std_errors, floor)
        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.where(
                np.abs(self.deviations) == 0.0,
                0.0,
                np.abs(self.deviations) / allow,
            )
        return np.unravel_index(int(np.argmax(score)), score.shape)

    def passes(self, se_mult: float = 5.0, floor: float = 0.05) -> bool:
        """Every entry within max(se_mult * SE, floor) of theory."""
        allow = np.maximum(se_mult * self.std_errors, floor)
        return bool(np.all(np.abs(self.deviations) <= allow))

    def to_json_obj(self) -> dict:
        return {
            "schema": "sheetforge/covariance-report/1",
            "points": [list(p) for p in self.points],
            "empirical": self.empirical.tolist(),
            "std_errors": self.std_errors.tolist(),
            "theoretical": self.theoretical.tolist(),
            "replicates": self.replicates,
            "zero_mean": self.zero_mean,
            "max_abs_deviation": self.max_abs_deviation,
            "max_std_deviation": self.max_std_deviation,
        }

    def to_text(self) -> str:
        lines = [
            f"covariance report: {len(self.points)} points, "
            f"{self.replicates} replicates, "
            f"estimator={'zero-mean' if self.zero_mean else 'mean-subtracted'}",
            f"max |dev| = {self.max_abs_deviation:.5f}   "
            f"max |dev|/SE = {self.max_std_deviation:.2f}",
            "  i   j   (s,t)            (s',t')          empirical    theory       dev        SE",
        ]
        n = len(self.points)
        for i in range(n):
            for j in range(i, n):
                p, q = self.points[i], self.points[j]
                lines.append(
                    f"{i:3d} {j:3d}   ({p[0]:.3f},{p[1]:.3f})   ({q[0]:.3f},{q[1]:.3f})"
                    f"   {self.empirical[i, j]:+.6f}   {self.theoretical[i, j]:+.6f}"
                    f"   {self.deviations[i, j]:+.5f}   {self.std_errors[i, j]:.5f}"
                )
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("i,j,s,t,s2,t2,empirical,std_error,theoretical\n")
            n = len(self.points)
            for i in range(n):
                for j in range(n):
                    p, q = self.points[i], self.points[j]
                    fh.write(
                        f"{i},{j},{p[0]!r},{p[1]!r},{q[0]!r},{q[1]!r},"
                        f"{self.empirical[i, j]!r},{self.std_errors[i, j]!r},"
                        f"{self.theoretical[i, j]!r}\n"
                    )


def default_zero_mean(spec: ThetaSpec) -> bool:
    """Estimator default: the parity kernel has provably zero mean (the
    count parity is a symmetric sign flip), so its covariance uses the
    zero-mean estimator; the wave kernels have no such symmetry and default
    to mean subtraction."""
    return spec.kind == "KacStroock"


def empirical_covariance(
    values: np.ndarray,
    points: Sequence[Tuple[float, float]],
    theoretical: np.ndarray,
    zero_mean: bool,
) -> CovarianceReport:
    """Per-entry covariance estimate from an (R, P) replicate-by-point value
    array, with moment-based standard errors (sd of the centered products /
    sqrt(R))."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise OutOfRange("values must be (replicates, points)")
    r, p = values.shape
    if r < 2:
        raise InsufficientReplicates(f"need at least 2 replicates, got {r}")
    if p != len(points):
        raise OutOfRange("points count does not match values columns")
    theoretical = np.asarray(theoretical, dtype=float)
    if theoretical.shape != (p, p):
        raise OutOfRange("theoretical matrix has wrong shape")
    centered = values if zero_mean else values - values.mean(axis=0)
    prods = np.einsum("ri,rj->rij", centered, centered)
    if zero_mean:
        emp = prods.mean(axis=0)
    else:
        emp = prods.sum(axis=0) / (r - 1)
    se = prods.std(axis=0, ddof=1) / math.sqrt(r)
    return CovarianceReport(
        points=tuple((float(s), float(t)) for s, t in points),
        empirical=emp,
        std_errors=se,
        theoretical=theoretical,
        replicates=r,
        zero_mean=zero_mean,
    )


# -- replicate generation ---------------------------------------------------


@dataclass
class ReplicateSet:
    """Values of the approximating field at fixed points across replicates,
    plus the provenance needed by downstream probes."""

    points: Tuple[Tuple[float, float], ...]
    values: np.ndarray
    theta_spec: ThetaSpec
    master_seed: int
    coupled_group: Optional[Tuple[int, str]] = None

    @property
    def replicates(self) -> int:
        return int(self.values.shape[0])


def generate_replicates(
    spec: ThetaSpec,
    k1: KernelSpec,
    k2: KernelSpec,
    grid: EvalGrid,
    lattice: Lattice,
    replicates: int,
    master_seed: int,
    workers: Optional[int] = None,
) -> ReplicateSet:
    """R independent realizations of X_n on the grid; replicate r uses seed
    mix64(master_seed, r). The kernel quadrature matrices are built once."""
    if replicates < 2:
        raise InsufficientReplicates(f"need at least 2 replicates, got {replicates}")
    m = lattice.m
    a = quadrature_rows(k1, m, grid.s_points)
    bt = quadrature_rows(k2, m, grid.t_points).T
    pts = grid_points(grid)
    out = np.empty((replicates, len(pts)))

    def work(r: int) -> None:
        sheet = simulate_sheet(spec.model, spec.n, lattice, mix64(master_seed, r))
        th = theta_values_from_sheet(spec, sheet.field.values, lattice)
        out[r] = (a @ th @ bt).ravel()

    _run_replicates(replicates, work, workers)
    return ReplicateSet(pts, out, spec, master_seed)


def generate_coupled_replicates(
    cos_spec: ThetaSpec,
    sin_spec: ThetaSpec,
    k1: KernelSpec,
    k2: KernelSpec,
    grid: EvalGrid,
    lattice: Lattice,
    replicates: int,
    master_seed: int,
    workers: Optional[int] = None,
) -> Tuple[ReplicateSet, ReplicateSet]:
    """Coupled cos/sin replicate sets: each replicate transforms ONE sheet
    draw through both wave kernels. The shared coupled_group tag is what
    independence_probe requires."""
    if cos_spec.kind != "LevyCos" or sin_spec.kind != "LevySin":
        raise OutOfRange("need (LevyCos, LevySin) specs")
    if (
        cos_spec.model != sin_spec.model
        or cos_spec.n != sin_spec.n
        or cos_spec.angle != sin_spec.angle
    ):
        raise OutOfRange("paired specs must share model, n and angle")
    if replicates < 2:
        raise InsufficientReplicates(f"need at least 2 replicates, got {replicates}")
    m = lattice.m
    a = quadrature_rows(k1, m, grid.s_points)
    bt = quadrature_rows(k2, m, grid.t_points).T
    pts = grid_points(grid)
    out_c = np.empty((replicates, len(pts)))
    out_s = np.empty((replicates, len(pts)))

    def work(r: int) -> None:
        sheet = simulate_sheet(cos_spec.model, cos_spec.n, lattice, mix64(master_seed, r))
        sv = sheet.field.values
        out_c[r] = (a @ theta_values_from_sheet(cos_spec, sv, lattice) @ bt).ravel()
        out_s[r] = (a @ theta_values_from_sheet(sin_spec, sv, lattice) @ bt).ravel()

    _run_replicates(replicates, work, workers)
    tag = (master_seed, "cos-sin-pair")
    return (
        ReplicateSet(pts, out_c, cos_spec, master_seed, coupled_group=tag),
        ReplicateSet(pts, out_s, sin_spec, master_seed, coupled_group=tag),
    )


# -- bilinear moment probe --------------------------------------------------


@dataclass(frozen=True)
class StepFunction:
    """Piecewise-constant function on [0, 1]: value values[i] on
    [breaks[i], breaks[i+1]); right-continuous, f(1) = last piece."""

    breaks: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        br = tuple(float(b) for b in self.breaks)
        vals = tuple(float(v) for v in self.values)
        if len(br) < 2 or br[0] != 0.0 or br[-1] != 1.0:
            raise OutOfRange("breaks must run from 0.0 to 1.0")
        if any(b2 <= b1 for b1, b2 in zip(br, br[1:])):
            raise OutOfRange("breaks must be strictly increasing")
        if len(vals) != len(br) - 1:
            raise OutOfRange("need exactly one value per piece")
        if not all(math.isfinite(v) for v in vals):
            raise OutOfRange("step values must be finite")
        object.__setattr__(self, "breaks", br)
        object.__setattr__(self, "values", vals)

    def l2_norm_sq(self) -> float:
        """Exact int_0^1 f(x)^2 dx."""
        return float(
            sum(
                v * v * (b2 - b1)
                for v, b1, b2 in zip(self.values, self.breaks, self.breaks[1:])
            )
        )

    def sample(self, x: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.breaks, x, side="right") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        return np.asarray(self.values, dtype=float)[idx]

    def to_json_obj(self) -> dict:
        return {"breaks": list(self.breaks), "values": list(self.values)}


@dataclass
class BilinearProbeReport:
    """Estimated E[(int int f g theta)^2] against the moment-bound budget
    C * int f^2 * int g^2. bound_mode is False for the parity kernel, whose
    constant is not pinned here — the ratio is then report-only."""

    ratio: MomentEstimate
    second_moment: MomentEstimate
    constant: float
    bound_mode: bool
    f: StepFunction
    g: StepFunction

    def passes(self, se_mult: float = 5.0) -> bool:
        """ratio <= 1 with at least se_mult standard errors of margin
        (always False outside bound mode)."""
        if not self.bound_mode:
            return False
        return self.ratio.value + se_mult * self.ratio.std_error <= 1.0

    def to_json_obj(self) -> dict:
        return {
            "schema": "sheetforge/bilinear-probe/1",
            "ratio": self.ratio.to_json_obj(),
            "second_moment": self.second_moment.to_json_obj(),
            "constant": self.constant,
            "bound_mode": self.bound_mode,
            "f": self.f.to_json_obj(),
            "g": self.g.to_json_obj(),
        }


def bilinear_moment_probe(
    spec: ThetaSpec,
    f: StepFunction,
    g: StepFunction,
    lattice: Lattice,
    replicates: int,
    master_seed: int,
    constant: Optional[float] = None,
    workers: Optional[int] = None,
) -> BilinearProbeReport:
    """Monte Carlo check of the bilinear second-moment bound

        E[(int int f(x) g(y) theta_n(x, y) dx dy)^2] <= C int f^2 int g^2

    with C = 136 K^2 / a(angle)^2 for the wave kernels. For KacStroock the
    constant is caller-supplied (default 1.0) and the report is informative
    only."""
    if replicates < 2:
        raise InsufficientReplicates(f"need at least 2 replicates, got {replicates}")
    if spec.kind in ("LevyCos", "LevySin"):
        k = normalizing_constant(spec.model, spec.angle)
        a_val = exponent(spec.model, spec.angle).a
        c = 136.0 * k * k / (a_val * a_val)
        bound_mode = True
    else:
        c = 1.0 if constant is None else float(constant)
        bound_mode = False
    mids = lattice.midpoints()
    u = f.sample(mids) / lattice.m
    v = g.sample(mids) / lattice.m
    zs = np.empty(replicates)

    def work(r: int) -> None:
        sheet = simulate_sheet(spec.model, spec.n, lattice, mix64(master_seed, r))
        th = theta_values_from_sheet(spec, sheet.field.values, lattice)
        zs[r] = u @ th @ v

    _run_replicates(replicates, work, workers)
    sq = zs * zs
    m2 = float(sq.mean())
    m2_se = float(sq.std(ddof=1) / math.sqrt(replicates))
    denom = c * f.l2_norm_sq() * g.l2_norm_sq()
    if denom > 0.0:
        ratio = MomentEstimate(m2 / denom, m2_se / denom, replicates)
    else:
        ratio = MomentEstimate(0.0 if m2 == 0.0 else math.inf, 0.0, replicates)
    return BilinearProbeReport(
        ratio=ratio,
        second_moment=MomentEstimate(m2, m2_se, replicates),
        constant=c,
        bound_mode=bound_mode,
        f=f,
        g=g,
    )


# -- window scaling probe ---------------------------------------------------


@dataclass
class WindowScalingReport:
    """Fitted power law of the m-th moment of windowed-field increments
    against window area: slope, its standard error, and a 2 SE confidence
    interval. predicted_min_slope (m * gamma) is carried when the caller
    supplies gamma; heavy_tail flags any window whose moment SE exceeds half
    its value."""

    m_order: int
    windows: Tuple[Tuple[float, float, float, float], ...]
    areas: Tuple[float, ...]
    moments: Tuple[MomentEstimate, ...]
    slope: float
    slope_se: float
    predicted_min_slope: Optional[float]
    heavy_tail: bool

    @property
    def slope_ci(self) -> Tuple[float, float]:
        return (self.slope - 2.0 * self.slope_se, self.slope + 2.0 * self.slope_se)

    def consistent_with_prediction(self) -> Optional[bool]:
        """Upper CI end at or above the predicted minimum slope (None when
        no prediction was supplied)."""
        if self.predicted_min_slope is None:
            return None
        return self.slope_ci[1] >= self.predicted_min_slope

    def to_json_obj(self) -> dict:
        return {
            "schema": "sheetforge/window-scaling/1",
            "m_order": self.m_order,
            "windows": [list(w) for w in self.windows],
            "areas": list(self.areas),
            "moments": [m.to_json_obj() for m in self.moments],
            "slope": self.slope,
            "slope_se": self.slope_se,
            "slope_ci": list(self.slope_ci),
            "predicted_min_slope": self.predicted_min_slope,
            "heavy_tail": self.heavy_tail,
        }


def window_scaling_probe(
    spec: ThetaSpec,
    k1: KernelSpec,
    k2: KernelSpec,
    m_order: int,
    base_rect: Tuple[float, float, float, float],
    windows: Sequence[Tuple[float, float, float, float]],
    lattice: Lattice,
    replicates: int,
    master_seed: int,
    predicted_gamma: Optional[float] = None,
    workers: Optional[int] = None,
) -> WindowScalingReport:
    """Estimate E[(increment of the windowed field over [s0,s0']x[t0,t0'])^m]
    for each window and regress log moment on log window area (weighted by
    the relative moment errors). Windows obey 0 < s0 < s0' < 2 s0 per axis.

    base_rect = (s, s2, t, t2) fixes the kernel-difference pair; each window
    (s0, s0p, t0, t0p) restricts the integration domain."""
    if m_order < 2 or m_order % 2 != 0:
        raise OutOfRange(f"m_order={m_order} must be an even integer >= 2")
    if replicates < 2:
        raise InsufficientReplicates(f"need at least 2 replicates, got {replicates}")
    if len(windows) < 2:
        raise OutOfRange("need at least two windows to fit a slope")
    s, s2, t, t2 = (float(v) for v in base_rect)
    if not (0.0 <= s <= s2 <= 1.0 and 0.0 <= t <= t2 <= 1.0):
        raise OutOfRange("base_rect must satisfy 0 <= s <= s2 <= 1, same in t")
    wlist = []
    for w in windows:
        s0, s0p, t0, t0p = (float(v) for v in w)
        if not (0.0 < s0 < s0p < 2.0 * s0) or s0p > 1.0:
            raise OutOfRange(f"window s-range ({s0}, {s0p}) must satisfy 0 < s0 < s0' < 2 s0")
        if not (0.0 < t0 < t0p < 2.0 * t0) or t0p > 1.0:
            raise OutOfRange(f"window t-range ({t0}, {t0p}) must satisfy 0 < t0 < t0' < 2 t0")
        wlist.append((s0, s0p, t0, t0p))
    mids = lattice.midpoints()
    delta = 1.0 / lattice.m
    dk1 = (kernel_row(k1, s2, mids) - kernel_row(k1, s, mids)) * delta
    dk2 = (kernel_row(k2, t2, mids) - kernel_row(k2, t, mids)) * delta
    u_rows = np.array([np.where((mids > s0) & (mids <= s0p), dk1, 0.0) for s0, s0p, _, _ in wlist])
    v_rows = np.array([np.where((mids > t0) & (mids <= t0p), dk2, 0.0) for _, _, t0, t0p in wlist])
    incs = np.empty((replicates, len(wlist)))

    def work(r: int) -> None:
        sheet = simulate_sheet(spec.model, spec.n, lattice, mix64(master_seed, r))
        th = theta_values_from_sheet(spec, sheet.field.values, lattice)
        incs[r] = np.einsum("wi,iw->w", u_rows, th @ v_rows.T)

    _run_replicates(replicates, work, workers)
    powers = incs**m_order
    vals = powers.mean(axis=0)
    ses = powers.std(axis=0, ddof=1) / math.sqrt(replicates)
    moments = tuple(
        MomentEstimate(float(v), float(e), replicates) for v, e in zip(vals, ses)
    )
    heavy = bool(np.any(ses > 0.5 * np.maximum(np.abs(vals), 1e-300)))
    areas = tuple((s0p - s0) * (t0p - t0) for s0, s0p, t0, t0p in wlist)
    if np.any(vals <= 0.0):
        raise OutOfRange(
            "a window moment is nonpositive; increase replicates or windows"
        )
    x = np.log(np.asarray(areas))
    y = np.log(vals)
    wgt = (vals / np.maximum(ses, 1e-300)) ** 2  # delta method on log values
    xm = np.average(x, weights=wgt)
    ym = np.average(y, weights=wgt)
    sxx = float(np.sum(wgt * (x - xm) ** 2))
    slope = float(np.sum(wgt * (x - xm) * (y - ym)) / sxx)
    slope_se = float(math.sqrt(1.0 / sxx))
    return WindowScalingReport(
        m_order=m_order,
        windows=tuple(wlist),
        areas=areas,
        moments=moments,
        slope=slope,
        slope_se=slope_se,
        predicted_min_slope=(
            None if predicted_gamma is None else m_order * float(predicted_gamma)
        ),
        heavy_tail=heavy,
    )


# -- gaussianity ------------------------------------------------------------


@dataclass
class GaussianityReport:
    ks_statistic: float
    p_value: float
    samples: int
    sigma2_theory: float

    def to_json_obj(self) -> dict:
        return {
            "schema": "sheetforge/gaussianity/1",
            "ks_statistic": self.ks_statistic,
            "p_value": self.p_value,
            "samples": self.samples,
            "sigma2_theory": self.sigma2_theory,
        }


def gaussianity_test(samples: np.ndarray, sigma2_theory: float) -> GaussianityReport:
    """Kolmogorov-Smirnov distance of the samples against
    Normal(0, sigma2_theory), with the asymptotic p-value."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.size < 500:
        raise InsufficientReplicates(
            f"gaussianity test needs >= 500 samples, got {samples.size}"
        )
    if not (sigma2_theory > 0.0):
        raise OutOfRange(f"sigma2_theory={sigma2_theory} must be positive")
    res = _scipy_stats.kstest(samples / math.sqrt(sigma2_theory), "norm")
    return GaussianityReport(
        ks_statistic=float(res.statistic),
        p_value=float(res.pvalue),
        samples=int(samples.size),
        sigma2_theory=float(sigma2_theory),
    )


# -- independence of the coupled pair ---------------------------------------


@dataclass
class IndependenceReport:
    """Cross-covariance of the coupled cos/sin fields over all point pairs;
    the limit predicts 0 everywhere."""

    points_first: Tuple[Tuple[float, float], ...]
    points_second: Tuple[Tuple[float, float], ...]
    cross_covariance: np.ndarray
    std_errors: np.ndarray
    replicates: int

    @property
    def max_std_deviation(self) -> float:
        dev = np.abs(self.cross_covariance)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dev == 0.0, 0.0, dev / self.std_errors)
        return float(np.max(ratio))

    def passes(self, se_mult: float = 5.0) -> bool:
        return self.max_std_deviation <= se_mult

    def to_json_obj(self) -> dict:
        return {
            "schema": "sheetforge/independence/1",
            "points_first": [list(p) for p in self.points_first],
            "points_second": [list(p) for p in self.points_second],
            "cross_covariance": self.cross_covariance.tolist(),
            "std_errors": self.std_errors.tolist(),
            "replicates": self.replicates,
            "max_std_deviation": self.max_std_deviation,
        }


def independence_probe(
    first: ReplicateSet, second: ReplicateSet
) -> IndependenceReport:
    """Cross-covariance between two replicate sets that share the same
    coupled sheet draws. Refuses uncoupled inputs (different or missing
    coupling tags): cross-covariance of independent runs is zero by
    construction of the seeds, so the probe would be vacuous."""
    if first.coupled_group is None or second.coupled_group is None:
        raise UncoupledInputs("replicate sets carry no coupling tag")
    if first.coupled_group != second.coupled_group:
        raise UncoupledInputs(
            f"coupling tags differ: {first.coupled_group} vs {second.coupled_group}"
        )
    a = np.asarray(first.values, dtype=float)
    b = np.asarray(second.values, dtype=float)
    if a.shape[0] != b.shape[0]:
        raise OutOfRange("replicate counts differ")
    r = a.shape[0]
    if r < 2:
        raise InsufficientReplicates(f"need at least 2 replicates, got {r}")
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    prods = np.einsum("ri,rj->rij", ac, bc)
    cross = prods.sum(axis=0) / (r - 1)
    se = prods.std(axis=0, ddof=1) / math.sqrt(r)
    return IndependenceReport(
        points_first=first.points,
        points_second=second.points,
        cross_covariance=cross,
        std_errors=se,
        replicates=r,
    )
