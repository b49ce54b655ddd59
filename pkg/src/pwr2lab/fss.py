"""Finite-size scaling pipeline: Phi = xi/n curves, size-pair crossings,
nu and z estimates with propagated errors, weighted thermodynamic
extrapolation with leave-one-out systematics, and central-charge fits.

Curves come either from the small-size diagonalizer or from external CSV
files, so the estimators run unchanged on data produced elsewhere.
"""

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize_scalar

from .errors import (
    AmbiguousCrossing,
    FitFailure,
    InsufficientPairs,
    InvalidGap,
    InvalidSize,
    NoCrossing,
    WindowTooNarrow,
)
from .graph import build_pwr2_couplings, build_ring_couplings
from .quantum import (
    build_hamiltonian,
    correlation_matrix,
    ground_with_gap,
    second_moment_xi,
)
from .rydgeo import rydberg_couplings, tambourine_positions

SOURCE_ED = "ed"
SOURCE_FILE = "external-file"

FAMILIES = ("pwr2-s", "chain-b", "tambourine-h")

DEFAULT_X_WINDOW = 0.5
DEFAULT_NU_GUESS = 1.0
DEFAULT_Z_FLOOR = 0.01
OMEGA_MAX = 4.0


@dataclass(frozen=True)
class PhiCurve:
    n: int
    grid: tuple       # ascending control values (s, b_field, or h)
    phi: tuple        # xi/n per grid point
    gap: tuple        # spectral gap per grid point (nan when unknown)
    sources: tuple    # per-point provenance: "ed" or "external-file"
    excluded: tuple = ()  # control values dropped for non-finite xi

    def __post_init__(self):
        if not (len(self.grid) == len(self.phi) == len(self.gap) == len(self.sources)):
            raise InvalidSize("grid, phi, gap, and sources must align")
        if len(self.grid) >= 2 and not all(
                a < b for a, b in zip(self.grid, self.grid[1:])):
            raise InvalidSize("control grid must be strictly ascending")
        if any(p < 0 for p in self.phi):
            raise InvalidSize("phi values must be nonnegative")


def _family_point(family: str, n: int, control: float, b_field: float, j: float):
    if family == "pwr2-s":
        return build_pwr2_couplings(n, control, j), b_field
    if family == "chain-b":
        return build_ring_couplings(n, 0.0, j, distances=(1,)), control
    if family == "tambourine-h":
        return rydberg_couplings(tambourine_positions(n, control)), b_field
    raise InvalidSize(f"family must be one of {FAMILIES}, got {family!r}")


def phi_curve(n: int, grid, family: str = "pwr2-s", b_field: float = 0.1,
              j: float = 1.0, tol: float = 1e-8, seed: int = 0) -> PhiCurve:
    """Phi = xi(q0=pi)/n over a control grid, one diagonalization per point.

    Points whose correlation length comes back non-finite are dropped from
    the curve and recorded in `excluded`.
    """
    controls = sorted(float(c) for c in grid)
    kept, phis, gaps, excluded = [], [], [], []
    for control in controls:
        g, b = _family_point(family, n, control, b_field, j)
        h = build_hamiltonian(g, b)
        sol, gap = ground_with_gap(h, tol=tol, seed=seed)
        c = correlation_matrix(sol.eigenvectors[:, 0], n)
        xi = second_moment_xi(c)
        if not math.isfinite(xi):
            excluded.append(control)
            continue
        kept.append(control)
        phis.append(xi / n)
        gaps.append(gap)
    return PhiCurve(n=n, grid=tuple(kept), phi=tuple(phis), gap=tuple(gaps),
                    sources=(SOURCE_ED,) * len(kept), excluded=tuple(excluded))


def save_curve(curve: PhiCurve, base) -> None:
    base = str(base)
    if base.endswith(".csv"):
        base = base[:-4]
    with open(base + ".csv", "w") as f:
        f.write("n,control,phi,gap\n")
        for x, p, g in zip(curve.grid, curve.phi, curve.gap):
            f.write(f"{curve.n},{x:.17g},{p:.17g},{g:.17g}\n")
    meta = {"schema_version": 1, "n": curve.n,
            "sources": list(curve.sources), "excluded": list(curve.excluded)}
    with open(base + ".json", "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def load_curve(base) -> PhiCurve:
    base = str(base)
    if base.endswith(".csv"):
        base = base[:-4]
    data = np.loadtxt(base + ".csv", delimiter=",", skiprows=1, ndmin=2)
    try:
        with open(base + ".json") as f:
            meta = json.load(f)
        sources = tuple(meta.get("sources", ())) or (SOURCE_FILE,) * len(data)
        excluded = tuple(meta.get("excluded", ()))
    except FileNotFoundError:
        sources = (SOURCE_FILE,) * len(data)
        excluded = ()
    if len(sources) != len(data):
        sources = (SOURCE_FILE,) * len(data)
    n = int(data[0, 0]) if len(data) else 0
    return PhiCurve(n=n, grid=tuple(data[:, 1]), phi=tuple(data[:, 2]),
                    gap=tuple(data[:, 3]), sources=sources, excluded=excluded)


def _ordered_pair(a: PhiCurve, b: PhiCurve):
    if a.n > b.n:
        a, b = b, a
    if b.n != 2 * a.n:
        raise InvalidSize(f"curve sizes must differ by exactly 2x, got {a.n}, {b.n}")
    if a.grid != b.grid:
        raise InvalidSize("curves must share one control grid")
    return a, b


def find_crossing(a: PhiCurve, b: PhiCurve) -> tuple:
    """Control value where the two Phi curves cross, with uncertainty.

    Monotone-cubic interpolants of each curve; their difference is bisected
    inside the unique sign-change cell to 1e-10. The uncertainty is the
    bracket misfit over twice the local slope difference, which reduces to
    the half-width of the bracketing cell when the difference is linear.
    """
    a, b = _ordered_pair(a, b)
    x = np.asarray(a.grid)
    fa = PchipInterpolator(x, np.asarray(a.phi))
    fb = PchipInterpolator(x, np.asarray(b.phi))
    diff = np.asarray(a.phi) - np.asarray(b.phi)

    cells = []
    for i in range(len(x) - 1):
        if diff[i] == 0.0:
            cells.append((i, i))
        elif diff[i] * diff[i + 1] < 0.0:
            cells.append((i, i + 1))
    if diff[-1] == 0.0:
        cells.append((len(x) - 1, len(x) - 1))
    if not cells:
        raise NoCrossing("curve difference never changes sign on the grid")

    roots = []
    for i, jj in cells:
        if i == jj:
            roots.append((float(x[i]), float(x[i]), float(x[i])))
            continue
        lo, hi = float(x[i]), float(x[jj])
        flo = float(fa(lo) - fb(lo))
        while hi - lo > 1e-10:
            mid = 0.5 * (lo + hi)
            fm = float(fa(mid) - fb(mid))
            if fm == 0.0:
                lo = hi = mid
                break
            if (flo < 0) == (fm < 0):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append((0.5 * (lo + hi), float(x[i]), float(x[jj])))
    if len(roots) > 1:
        raise AmbiguousCrossing(
            f"curve difference crosses zero {len(roots)} times: "
            f"{[r[0] for r in roots]}", roots=[r[0] for r in roots])

    x0, cl, cr = roots[0]
    slope_diff = abs(float(fa.derivative()(x0) - fb.derivative()(x0)))
    if slope_diff > 0 and cr > cl:
        fl = abs(float(fa(cl) - fb(cl)))
        fr = abs(float(fa(cr) - fb(cr)))
        sigma = (fl + fr) / (2.0 * slope_diff)
    else:
        sigma = 0.5 * (cr - cl)
    return x0, float(sigma)


def _ols_slope(x: np.ndarray, y: np.ndarray) -> tuple:
    """Least-squares slope and its standard error."""
    m = len(x)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise FitFailure("window points share one control value")
    slope = float(xc @ y) / sxx
    resid = y - y.mean() - slope * xc
    dof = max(m - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, se


def estimate_nu(a: PhiCurve, b: PhiCurve, crossing: float,
                x_win: float = DEFAULT_X_WINDOW,
                nu_guess: float = DEFAULT_NU_GUESS) -> tuple:
    """Correlation-length exponent from the slope ratio at the crossing.

    Each curve is fit linearly in the control variable over the window
    |control - crossing| * n^(1/nu_guess) <= x_win. The scaling form makes
    the slope grow as n^(1/nu), so nu = 1/log2(slope_2n/slope_n); the quoted
    sigma propagates both regression standard errors.
    """
    a, b = _ordered_pair(a, b)
    slopes = []
    for curve in (a, b):
        x = np.asarray(curve.grid)
        scaled = (x - crossing) * curve.n ** (1.0 / nu_guess)
        sel = np.abs(scaled) <= x_win
        if sel.sum() < 4:
            raise WindowTooNarrow(
                f"only {int(sel.sum())} points of the n={curve.n} curve fall in "
                f"the scaled window |x| <= {x_win}; need 4")
        slopes.append(_ols_slope(x[sel], np.asarray(curve.phi)[sel]))
    (s1, e1), (s2, e2) = slopes
    ratio = s2 / s1 if s1 != 0.0 else 0.0
    if ratio <= 0.0:
        raise FitFailure(f"slope ratio {ratio} is not positive; curves do not "
                         "steepen consistently with scaling")
    lr = math.log2(ratio)
    if lr == 0.0:
        raise FitFailure("equal slopes leave the exponent unconstrained")
    nu = 1.0 / lr
    rel = math.sqrt((e1 / s1) ** 2 + (e2 / s2) ** 2)
    sigma = nu * nu / math.log(2.0) * rel
    return float(nu), float(sigma)


def estimate_z(gap_n: float, gap_2n: float,
               sigma_floor: float = DEFAULT_Z_FLOOR) -> tuple:
    """Dynamical exponent from the gap ratio across a size doubling."""
    if gap_n <= 0.0 or gap_2n <= 0.0:
        raise InvalidGap(f"gaps must be positive, got {gap_n}, {gap_2n}")
    return float(-math.log2(gap_2n / gap_n)), float(sigma_floor)


@dataclass(frozen=True)
class ScalingEstimate:
    pair: tuple               # (n, 2n)
    critical_point: float
    critical_point_sigma: float
    nu: float
    nu_sigma: float
    z: float
    z_sigma: float
    m_eff: float              # sqrt(n * 2n)


def estimate_pair(a: PhiCurve, b: PhiCurve,
                  x_win: float = DEFAULT_X_WINDOW,
                  nu_guess: float = DEFAULT_NU_GUESS,
                  z_floor: float = DEFAULT_Z_FLOOR) -> ScalingEstimate:
    """Crossing, nu, and z for one (n, 2n) curve pair."""
    a, b = _ordered_pair(a, b)
    x0, x0_sig = find_crossing(a, b)
    nu, nu_sig = estimate_nu(a, b, x0, x_win=x_win, nu_guess=nu_guess)
    x = np.asarray(a.grid)
    gaps_a = np.asarray(a.gap)
    gaps_b = np.asarray(b.gap)
    if np.all(np.isfinite(gaps_a)) and np.all(np.isfinite(gaps_b)):
        gap_n = float(PchipInterpolator(x, gaps_a)(x0))
        gap_2n = float(PchipInterpolator(x, gaps_b)(x0))
        z, z_sig = estimate_z(gap_n, gap_2n, sigma_floor=z_floor)
    else:
        z, z_sig = float("nan"), float("nan")
    return ScalingEstimate(
        pair=(a.n, b.n), critical_point=x0, critical_point_sigma=x0_sig,
        nu=nu, nu_sigma=nu_sig, z=z, z_sigma=z_sig,
        m_eff=math.sqrt(a.n * b.n))


@dataclass(frozen=True)
class ExtrapolationResult:
    y_inf: float
    sigma_stat: float
    omega: float
    sigma_sys: float
    sigma_final: float
    pairs_used: tuple


def _pick(est: ScalingEstimate, which: str) -> tuple:
    if which == "nu":
        return est.nu, est.nu_sigma
    if which == "z":
        return est.z, est.z_sigma
    raise InvalidSize(f"which must be 'nu' or 'z', got {which!r}")


def _weighted_power_fit(m: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Profile the correction exponent: y = y_inf + a*m^-omega, weights fixed."""

    def solve(omega):
        xcol = m ** (-omega)
        x = np.stack([np.ones_like(m), xcol], axis=1)
        xtwx = x.T @ (w[:, None] * x)
        try:
            cov = np.linalg.inv(xtwx)
        except np.linalg.LinAlgError as exc:
            raise FitFailure("degenerate design matrix in the power-law fit",
                             diagnostics={"omega": omega}) from exc
        beta = cov @ (x.T @ (w * y))
        resid = y - x @ beta
        return float(w @ (resid * resid)), beta, cov

    res = minimize_scalar(lambda om: solve(om)[0], bounds=(1e-6, OMEGA_MAX),
                          method="bounded", options={"xatol": 1e-12})
    omega = float(res.x)
    chi2, beta, cov = solve(omega)
    if not np.all(np.isfinite(beta)):
        raise FitFailure("power-law fit produced non-finite coefficients",
                         diagnostics={"omega": omega, "chi2": chi2})
    return float(beta[0]), float(math.sqrt(max(cov[0, 0], 0.0))), omega, chi2


def extrapolate_exponent(estimates, which: str = "nu") -> ExtrapolationResult:
    """Thermodynamic exponent via the weighted single-power correction fit."""
    ests = sorted(estimates, key=lambda e: e.m_eff)
    if len(ests) < 3:
        raise InsufficientPairs(f"need at least 3 size pairs, got {len(ests)}")
    m = np.array([e.m_eff for e in ests])
    vals = np.array([_pick(e, which)[0] for e in ests])
    sigs = np.array([max(_pick(e, which)[1], 1e-12) for e in ests])
    if not np.all(np.isfinite(vals)):
        raise FitFailure(f"non-finite {which} estimates cannot be extrapolated")
    y_inf, sigma_stat, omega, _ = _weighted_power_fit(m, vals, 1.0 / sigs ** 2)
    return ExtrapolationResult(
        y_inf=y_inf, sigma_stat=sigma_stat, omega=omega,
        sigma_sys=0.0, sigma_final=sigma_stat,
        pairs_used=tuple(e.pair for e in ests))


def leave_one_out_systematics(estimates, which: str = "nu") -> ExtrapolationResult:
    """Extrapolation with drop-smallest/drop-largest sensitivity folded in."""
    ests = sorted(estimates, key=lambda e: e.m_eff)
    if len(ests) < 4:
        raise InsufficientPairs(
            f"need at least 4 size pairs so each sub-fit keeps 3, got {len(ests)}")
    full = extrapolate_exponent(ests, which)
    drop_small = extrapolate_exponent(ests[1:], which)
    drop_large = extrapolate_exponent(ests[:-1], which)
    sigma_sys = max(abs(full.y_inf - drop_small.y_inf),
                    abs(full.y_inf - drop_large.y_inf))
    return replace(full, sigma_sys=sigma_sys,
                   sigma_final=math.hypot(full.sigma_stat, sigma_sys))


def central_charge_fit(entropy_profile, n: int, window: tuple | None = None) -> tuple:
    """Central charge from the logarithmic growth of block entropy.

    Fits S(l) against x_l = ln[(n/pi) sin(pi l/n)] over the window, default
    [log2 n, n - log2 n] clipped to l <= n/2; c = 3*slope and delta_c is
    three times the slope's standard error.
    """
    prof = np.asarray(entropy_profile, dtype=float)
    half = n // 2
    if len(prof) == n - 1:
        prof = prof[:half]
    elif len(prof) != half:
        raise InvalidSize(
            f"need S(l) for l = 1..{half} (or a full n-1 profile), got {len(prof)}")
    ells = np.arange(1, half + 1)
    if window is None:
        lo, hi = math.log2(n), n - math.log2(n)
    else:
        lo, hi = window
        if lo < 1 or hi > half:
            raise InvalidSize(f"window {window} must lie within [1, {half}]")
    sel = (ells >= lo - 1e-9) & (ells <= min(hi, half) + 1e-9)
    if sel.sum() < 3:
        raise WindowTooNarrow(
            f"{int(sel.sum())} profile points in window [{lo}, {hi}]; need 3")
    x = np.log((n / math.pi) * np.sin(math.pi * ells[sel] / n))
    slope, se = _ols_slope(x, prof[sel])
    return 3.0 * slope, 3.0 * se
