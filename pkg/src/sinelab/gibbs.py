"""Background-subtracted DLR energies and a fixed-N Metropolis sampler.

The conditional law in a window, given an exterior configuration, is sampled
by single-site Metropolis moves against the uniform (Bernoulli) reference:
the particle count is fixed, proposals are uniform in the window, and only
energy differences are ever formed, so the partition function never appears.
The exterior interaction is truncated at a finite radius with the truncation
tail reported, since finite samples cannot realize the infinite-volume limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CoincidentPoints, TruncationExceedsWindow
from .pointproc import PointConfiguration
from .transport import (
    SignedMeasure,
    interaction_energy,
    lebesgue_log_potential,
    lebesgue_self_energy,
)

__all__ = [
    "GibbsSpec",
    "interior_energy",
    "move_energy",
    "MoveEnergy",
    "gibbs_mcmc",
    "GibbsSamples",
    "total_energy",
    "discrete_sites",
    "discrete_two_particle_reference",
    "gibbs_mcmc_discrete",
]


@dataclass
class GibbsSpec:
    """Inverse temperature, window, exterior configuration, and truncation."""

    beta: float
    lam: float
    gamma: PointConfiguration
    truncation_p: float = 0.0

    def __post_init__(self):
        w_lo, w_hi = self.gamma.window
        half = min(-w_lo, w_hi)
        if self.truncation_p == 0.0:
            self.truncation_p = half
        if self.truncation_p > half + 1e-12:
            raise TruncationExceedsWindow(
                f"truncation {self.truncation_p:g} exceeds window half-width {half:g}")
        if self.truncation_p <= self.lam:
            raise ValueError("truncation radius must exceed lam")

    @property
    def interior(self):
        return self.gamma.restrict(-self.lam, self.lam)

    @property
    def n_interior(self):
        return len(self.interior)

    def exterior_points(self, p=None):
        p = self.truncation_p if p is None else p
        pts = self.gamma.points
        mask = (np.abs(pts) > self.lam) & (np.abs(pts) <= p)
        return pts[mask]


def interior_energy(eta, lam):
    """Half the pair integral of -log|x-y| against (d eta - dx)^2, diagonal off.

    Computed through the shared signed-measure kernel.
    """
    pts = np.asarray(eta.points if isinstance(eta, PointConfiguration) else eta,
                     dtype=float)
    A = SignedMeasure(atoms=pts, atom_weight=1.0,
                      densities=[(lambda y: np.ones_like(y), -lam, lam, -1.0)])
    return 0.5 * interaction_energy(A, A, exclude_diagonal=True)


def _interior_energy_fast(pts, lam):
    """Closed-form version used for Metropolis bookkeeping."""
    pts = np.asarray(pts, dtype=float)
    if len(pts) >= 2:
        diff = np.abs(pts[:, None] - pts[None, :])
        mask = ~np.eye(len(pts), dtype=bool)
        if np.any(diff[mask] == 0.0):
            raise CoincidentPoints("coincident interior points")
        np.fill_diagonal(diff, 1.0)
        pair = float(np.sum(-np.log(diff[np.triu_indices(len(pts), 1)])))
    else:
        pair = 0.0
    cross = float(np.sum(lebesgue_log_potential(pts, -lam, lam))) if pts.size else 0.0
    return pair - cross + 0.5 * lebesgue_self_energy(-lam, lam)


def _exterior_one_point_potential(y, spec, p):
    """Interaction of a unit charge at y (inside) with (d gamma - dx) outside."""
    ext = spec.exterior_points(p)
    point_part = float(np.sum(-np.log(np.abs(ext - y)))) if ext.size else 0.0
    background = (lebesgue_log_potential(y, -p, -spec.lam)
                  + lebesgue_log_potential(y, spec.lam, p))
    return point_part - background


@dataclass(frozen=True)
class MoveEnergy:
    value: float
    p: float
    cauchy_tail: dict


def move_energy(eta, spec, p=None):
    """Truncated interaction of (eta - gamma_interior) with the exterior field.

    A convergence report over doublings of the truncation radius (clipped to
    the available window) is attached as Cauchy differences.
    """
    pts = np.asarray(eta.points if isinstance(eta, PointConfiguration) else eta,
                     dtype=float)
    ref = spec.interior.points
    if len(pts) != len(ref):
        raise ValueError("eta must carry exactly |gamma_interior| points")
    p = spec.truncation_p if p is None else p
    if p > min(-spec.gamma.window[0], spec.gamma.window[1]) + 1e-12:
        raise TruncationExceedsWindow("requested truncation exceeds the sample window")

    def value_at(q):
        tot = sum(_exterior_one_point_potential(y, spec, q) for y in pts)
        tot -= sum(_exterior_one_point_potential(y, spec, q) for y in ref)
        return tot

    val = value_at(p)
    tail = {}
    prev = None
    for q in (2 * spec.lam, 4 * spec.lam, 8 * spec.lam):
        if q > min(-spec.gamma.window[0], spec.gamma.window[1]):
            break
        cur = value_at(q)
        if prev is not None:
            tail[f"p={q:g}"] = cur - prev[1]
        prev = (q, cur)
    return MoveEnergy(value=val, p=p, cauchy_tail=tail)


def total_energy(pts, spec, p=None):
    """H + M for a full interior state (used to validate incremental updates)."""
    p = spec.truncation_p if p is None else p
    pts = np.asarray(pts, dtype=float)
    ref = spec.interior.points
    h = _interior_energy_fast(pts, spec.lam)
    m = (sum(_exterior_one_point_potential(y, spec, p) for y in pts)
         - sum(_exterior_one_point_potential(y, spec, p) for y in ref))
    return h + m


@dataclass
class GibbsSamples:
    configs: list
    acceptance_rate: float
    n_proposals: int
    spec: GibbsSpec = field(repr=False, default=None)


def _rng(seed, stream):
    return np.random.Generator(np.random.Philox(
        key=np.array([seed & 0xFFFFFFFFFFFFFFFF, stream], dtype=np.uint64)))


def gibbs_mcmc(spec, steps, seed, thin=None, burn_in=None):
    """Fixed-N single-site Metropolis chain for the windowed conditional law.

    Proposals replace one uniformly chosen particle by a uniform position in
    the window; acceptance is min(1, exp(-beta * dE)).  Deterministic given
    the seed; returns thinned immutable snapshots plus the acceptance rate.
    """
    n = spec.n_interior
    if n < 1:
        raise ValueError("need at least one interior particle")
    lam, beta, p = spec.lam, spec.beta, spec.truncation_p
    thin = max(1, 10 * n) if thin is None else thin
    burn_in = min(steps // 5, 50 * n) if burn_in is None else burn_in

    state = spec.interior.points.astype(float).copy()
    ext = spec.exterior_points(p)

    def one_point_terms(y):
        # non-pair energy terms attached to a particle at y
        w = float(np.sum(-np.log(np.abs(ext - y)))) if ext.size else 0.0
        w -= (lebesgue_log_potential(y, -p, -lam)
              + lebesgue_log_potential(y, lam, p))
        return w - lebesgue_log_potential(y, -lam, lam)

    one_point = np.array([one_point_terms(y) for y in state])

    rng = _rng(seed, 0)
    samples = []
    accepted = 0
    chunk = 8192
    done = 0
    while done < steps:
        m = min(chunk, steps - done)
        sites = rng.integers(0, n, size=m)
        props = rng.uniform(-lam, lam, size=m)
        us = rng.random(size=m)
        for j in range(m):
            i = sites[j]
            z = props[j]
            old = state[i]
            others = np.abs(np.delete(state, i) - z)
            if np.any(others == 0.0):
                continue  # coincident proposal: infinite energy
            d_pair = (-float(np.sum(np.log(others)))
                      + float(np.sum(np.log(np.abs(np.delete(state, i) - old)))))
            new_one = one_point_terms(z)
            d_e = d_pair + new_one - one_point[i]
            if beta * d_e <= 0 or us[j] < np.exp(-beta * d_e):
                state[i] = z
                one_point[i] = new_one
                accepted += 1
            step_idx = done + j + 1
            if step_idx > burn_in and (step_idx - burn_in) % thin == 0:
                samples.append(PointConfiguration(state.copy(), (-lam, lam)))
        done += m
    return GibbsSamples(configs=samples, acceptance_rate=accepted / max(steps, 1),
                        n_proposals=steps, spec=spec)


# -- discretized toy state space -------------------------------------------------------


def discrete_sites(lam, n_sites):
    """Cell midpoints of a uniform discretization of the window."""
    edges = np.linspace(-lam, lam, n_sites + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def _discrete_pair_state_energy(i, j, sites, spec):
    pts = np.array([sites[i], sites[j]])
    return total_energy(pts, spec)


def discrete_two_particle_reference(spec, n_sites):
    """Exact stationary law and transition matrix of the discretized chain.

    States are unordered site pairs {i, j}; the chain picks a particle
    uniformly, proposes a uniform site, and accepts by the Metropolis rule.
    Returns (sites, states, probabilities, transition matrix).
    """
    if spec.n_interior != 2:
        raise ValueError("reference enumeration is for exactly two particles")
    sites = discrete_sites(spec.lam, n_sites)
    states = [(i, j) for i in range(n_sites) for j in range(i + 1, n_sites)]
    index = {st: k for k, st in enumerate(states)}
    energies = np.array([_discrete_pair_state_energy(i, j, sites, spec)
                         for i, j in states])
    w = np.exp(-spec.beta * (energies - energies.min()))
    probs = w / w.sum()

    n_states = len(states)
    P = np.zeros((n_states, n_states))
    for k, (i, j) in enumerate(states):
        for moving, fixed in ((i, j), (j, i)):
            for z in range(n_sites):
                if z == fixed:
                    continue  # coincident: rejected
                new = (min(z, fixed), max(z, fixed))
                k2 = index[new]
                if k2 == k:
                    continue
                d_e = energies[k2] - energies[k]
                acc = min(1.0, np.exp(-spec.beta * d_e))
                P[k, k2] += 0.5 * (1.0 / n_sites) * acc
        P[k, k] = 1.0 - P[k].sum()
    return sites, states, probs, P


def gibbs_mcmc_discrete(spec, n_sites, steps, seed):
    """Metropolis chain on the discretized two-or-more-particle state space."""
    sites = discrete_sites(spec.lam, n_sites)
    n = spec.n_interior
    # map initial interior points to their nearest sites (must stay distinct)
    occ = []
    for y in spec.interior.points:
        k = int(np.argmin(np.abs(sites - y)))
        while k in occ:
            k = (k + 1) % n_sites
        occ.append(k)
    occ = np.array(occ, dtype=int)

    # one-point terms per site and pair table
    one_pt = np.array([
        (float(np.sum(-np.log(np.abs(spec.exterior_points() - s))))
         if spec.exterior_points().size else 0.0)
        - lebesgue_log_potential(s, -spec.truncation_p, -spec.lam)
        - lebesgue_log_potential(s, spec.lam, spec.truncation_p)
        - lebesgue_log_potential(s, -spec.lam, spec.lam)
        for s in sites])
    with np.errstate(divide="ignore"):
        pair = -np.log(np.abs(sites[:, None] - sites[None, :]))

    rng = _rng(seed, 1)
    sites_draw = rng.integers(0, n, size=steps)
    prop_draw = rng.integers(0, n_sites, size=steps)
    u_draw = rng.random(size=steps)
    counts = np.zeros(n_sites if n == 1 else (n_sites, n_sites))
    beta = spec.beta
    for t in range(steps):
        i = sites_draw[t]
        z = prop_draw[t]
        if np.any(np.delete(occ, i) == z):
            pass  # rejected: coincident
        else:
            old = occ[i]
            others = np.delete(occ, i)
            d_e = (float(np.sum(pair[z, others])) - float(np.sum(pair[old, others]))
                   + one_pt[z] - one_pt[old])
            if beta * d_e <= 0 or u_draw[t] < np.exp(-beta * d_e):
                occ[i] = z
        if n == 1:
            counts[occ[0]] += 1
        else:
            a, b = sorted((occ[0], occ[1]))
            counts[a, b] += 1
    return sites, occ, counts
