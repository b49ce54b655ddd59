"""Metropolis sampling of the classical model at low temperature, used to
locate the two lowest energy levels without enumerating the cube.

The sampler tracks exact integer bond sums per distance class, so every
recorded energy is reconstructed from integers and identical runs are
bit-identical. Each chain owns a splitmix64 stream seeded from the plan seed
and the chain index; one uniform is drawn per site visit whether or not the
move needs it, which keeps the stream aligned across implementations.
"""

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .errors import InvalidSize, SizeMismatch
from ._bits import derive_seed
from .graph import CouplingGraph, SpinConfiguration, recursive_ground_state, euclidean_afm

INIT_MODES = ("random", "afm", "recursive")

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = 0xFFFFFFFFFFFFFFFF
_INV_2_53 = 1.0 / 9007199254740992.0


def sm64_next(state: int):
    """One splitmix64 step: (new_state, output). Pure-python reference."""
    state = (state + 0x9E3779B97F4A7C15) & _U64_MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64_MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64_MASK
    z ^= z >> 31
    return state, z


def sm64_uniform(state: int):
    """(new_state, double in [0, 1)) using the top 53 bits."""
    state, z = sm64_next(state)
    return state, (z >> 11) * _INV_2_53


@dataclass(frozen=True)
class McmcPlan:
    """Sampling plan. None fields resolve against the graph at run time."""

    beta: float | None = None       # default 50 / max |coupling|
    sweeps: int | None = None       # default 2000 * n
    chains: int = 32
    burn_in: float = 0.1            # fraction of sweeps before level tracking
    seed: int = 0
    init: str = "random"

    def resolved(self, g: CouplingGraph) -> "McmcPlan":
        beta = self.beta if self.beta is not None else 50.0 / g.max_abs_coupling()
        sweeps = self.sweeps if self.sweeps is not None else 2000 * g.n_sites
        plan = replace(self, beta=float(beta), sweeps=int(sweeps))
        plan.validate()
        return plan

    def validate(self):
        if self.beta is not None and not self.beta > 0:
            raise InvalidSize(f"beta must be positive, got {self.beta}")
        if self.sweeps is not None and self.sweeps < 1:
            raise InvalidSize(f"sweeps must be >= 1, got {self.sweeps}")
        if self.chains < 1:
            raise InvalidSize(f"chains must be >= 1, got {self.chains}")
        if not 0.0 <= self.burn_in < 1.0:
            raise InvalidSize(f"burn_in must be a fraction in [0, 1), got {self.burn_in}")
        if self.init not in INIT_MODES:
            raise InvalidSize(f"init must be one of {INIT_MODES}, got {self.init!r}")


@dataclass(frozen=True)
class GapEstimate:
    e0: float
    e1: float                 # +inf when no second level was seen
    gap: float                # e1 - e0, +inf when e1 is missing
    e0_hits: int              # chains whose lowest level matches e0
    distinct_levels_seen: int
    converged: bool           # at least two chains reached e0 and e1 exists


@dataclass(frozen=True)
class ChainResult:
    e0: float
    e1: float
    trace: np.ndarray         # energy after every sweep, burn-in included
    final_state: SpinConfiguration


def _class_tables(g: CouplingGraph):
    if g.ring_distance is None:
        raise InvalidSize("sampling requires a ring coupling graph")
    classes = g.distance_classes()
    n = g.n_sites
    d = np.array([c[0] for c in classes], dtype=np.int64)
    w = np.array([c[1] for c in classes])
    sites = np.arange(n, dtype=np.int64)
    nb_plus = np.empty((len(d), n), dtype=np.int64)
    nb_minus = np.empty((len(d), n), dtype=np.int64)
    antipodal = np.zeros(len(d), dtype=np.bool_)
    for ci, dist in enumerate(d):
        nb_plus[ci] = (sites + dist) % n
        nb_minus[ci] = (sites - dist) % n
        antipodal[ci] = 2 * dist == n
    return d, w, nb_plus, nb_minus, antipodal


def _energy_scale(g: CouplingGraph) -> float:
    total = sum(abs(w) * count for _d, w, count in g.distance_classes())
    return max(1.0, 0.25 * total)


@njit(cache=True, nogil=True)
def _kernel(sig, dists, weights, nb_plus, nb_minus, antipodal,
            beta, sweeps, burn_sweeps, seed, tol):
    n = sig.shape[0]
    ncls = dists.shape[0]
    m = np.zeros(ncls, dtype=np.int64)
    for ci in range(ncls):
        lim = n // 2 if antipodal[ci] else n
        acc = 0
        for i in range(lim):
            acc += sig[i] * sig[nb_plus[ci, i]]
        m[ci] = acc

    dm = np.zeros(ncls, dtype=np.int64)
    state = seed
    e0 = 1e300
    e1 = 1e300
    trace = np.empty(sweeps)
    for sw in range(sweeps):
        for k in range(n):
            de = 0.0
            for ci in range(ncls):
                if antipodal[ci]:
                    step = -2 * sig[k] * sig[nb_plus[ci, k]]
                else:
                    step = -2 * sig[k] * (sig[nb_plus[ci, k]] + sig[nb_minus[ci, k]])
                dm[ci] = step
                de += 0.25 * weights[ci] * step
            state = state + _SM_GAMMA
            z = state
            z = (z ^ (z >> np.uint64(30))) * _SM_M1
            z = (z ^ (z >> np.uint64(27))) * _SM_M2
            z = z ^ (z >> np.uint64(31))
            u = (z >> np.uint64(11)) * _INV_2_53
            if de <= 0.0 or np.exp(-beta * de) > u:
                sig[k] = -sig[k]
                for ci in range(ncls):
                    m[ci] += dm[ci]
                if sw >= burn_sweeps:
                    e = 0.0
                    for ci in range(ncls):
                        e += weights[ci] * m[ci]
                    e *= 0.25
                    if e < e0 - tol:
                        e1 = e0
                        e0 = e
                    elif e <= e0 + tol:
                        if e < e0:
                            e0 = e
                    elif e < e1 - tol:
                        e1 = e
                    elif e < e1:
                        e1 = e
        e = 0.0
        for ci in range(ncls):
            e += weights[ci] * m[ci]
        e *= 0.25
        trace[sw] = e
        if sw >= burn_sweeps:
            if e < e0 - tol:
                e1 = e0
                e0 = e
            elif e <= e0 + tol:
                if e < e0:
                    e0 = e
            elif e < e1 - tol:
                e1 = e
            elif e < e1:
                e1 = e
    return e0, e1, trace


def _initial_sigma(g: CouplingGraph, init: str, state: int):
    n = g.n_sites
    if init == "afm":
        return euclidean_afm(n).sigma().astype(np.int64), state
    if init == "recursive":
        return recursive_ground_state(n).sigma().astype(np.int64), state
    sig = np.empty(n, dtype=np.int64)
    for i in range(n):
        state, z = sm64_next(state)
        sig[i] = 1 if (z >> 63) else -1
    return sig, state


def run_single_chain(g: CouplingGraph, plan: McmcPlan, chain_index: int = 0) -> ChainResult:
    """One chain of the resolved plan; bit-identical for identical inputs."""
    plan = plan.resolved(g)
    d, w, nbp, nbm, anti = _class_tables(g)
    seed = derive_seed(plan.seed, chain_index)
    sig, seed = _initial_sigma(g, plan.init, seed)
    burn = int(plan.burn_in * plan.sweeps)
    tol = 1e-9 * _energy_scale(g)
    e0, e1, trace = _kernel(sig, d, w, nbp, nbm, anti,
                            plan.beta, plan.sweeps, burn,
                            np.uint64(seed & _U64_MASK), tol)
    bits = ((sig + 1) // 2).astype(np.uint8)
    return ChainResult(e0, e1, trace, SpinConfiguration(g.n_sites, bits))


def metropolis_sweep(config: SpinConfiguration, g: CouplingGraph,
                     beta: float, state: int):
    """One sequential Metropolis pass over all sites (reference path).

    Visits sites in index order, draws exactly one uniform per site, accepts
    when the energy change is nonpositive or exp(-beta*dE) exceeds the draw.
    Returns (new_config, new_rng_state, accepted_count). The fast kernel
    follows this exact stream, so the two stay interchangeable.
    """
    if config.n_sites != g.n_sites:
        raise SizeMismatch(f"configuration has {config.n_sites} sites, graph {g.n_sites}")
    d, w, nbp, nbm, anti = _class_tables(g)
    sig = config.sigma().astype(np.int64)
    accepted = 0
    for k in range(g.n_sites):
        de = 0.0
        for ci in range(len(d)):
            if anti[ci]:
                step = -2 * sig[k] * sig[nbp[ci, k]]
            else:
                step = -2 * sig[k] * (sig[nbp[ci, k]] + sig[nbm[ci, k]])
            de += 0.25 * w[ci] * step
        state, u = sm64_uniform(state)
        if de <= 0.0 or np.exp(-beta * de) > u:
            sig[k] = -sig[k]
            accepted += 1
    bits = ((sig + 1) // 2).astype(np.uint8)
    return SpinConfiguration(g.n_sites, bits), state, accepted


def estimate_low_spectrum(g: CouplingGraph, plan: McmcPlan | None = None) -> GapEstimate:
    """Two lowest distinct energy levels seen across independent chains.

    e0 is the lowest post-burn-in energy over all chains; e0_hits counts the
    chains that reached it. The estimate is converged when at least two
    chains reached e0 and a second level was observed. A missing second
    level reports e1 = gap = +inf with converged False.
    """
    plan = (plan or McmcPlan()).resolved(g)
    tol = 1e-9 * _energy_scale(g)
    lows, seconds = [], []
    for c in range(plan.chains):
        r = run_single_chain(g, plan, c)
        lows.append(r.e0)
        if r.e1 < 1e300:
            seconds.append(r.e1)
    lows = np.array(lows)
    e0 = float(lows.min())
    hits = int(np.sum(lows <= e0 + tol))
    candidates = np.concatenate([lows, np.array(seconds)]) if seconds else lows
    above = candidates[candidates > e0 + tol]
    e1 = float(above.min()) if len(above) else float("inf")

    distinct = 1
    vals = np.sort(candidates)
    for i in range(1, len(vals)):
        if vals[i] - vals[i - 1] > tol:
            distinct += 1

    gap = e1 - e0 if np.isfinite(e1) else float("inf")
    converged = hits >= 2 and np.isfinite(e1)
    return GapEstimate(e0, e1, gap, hits, distinct, converged)
