"""Projected pseudo-gradient descent, sigma-continuation with entropy
monitoring, one-parameter min-max over sweepouts, and sigma-selection on
sampled min-max values."""

import warnings

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as sparse_linalg

from .errors import (DegenerateFace, LineSearchStall, NonCompactFamily,
                     NonMonotoneBeta)
from .energy import (EnergyBreakdown, criticality_norm, gradient,
                     standard_dictionary)
from .immersion import Immersion, cotangent_weights, vertex_areas
from .kernel import get_kernel
from . import mesh as meshmod

ARMIJO = 0.5
BACKTRACK = 0.5
MIN_STEP = 1e-16
MAX_STEP = 4.0          # preconditioned steps are Newton-scaled
PRECOND_REFRESH = 10    # accepted steps between preconditioner rebuilds


def _build_preconditioner(immersion, sigma, kern):
    """Sparse approximation of the energy Hessian: alpha M + L + c L M^-1 L.

    L is the cotangent Laplacian (the area term's Hessian shape), the
    squared-Laplacian block models the quartic bending term, and the mass
    term regularizes the translational null space.  Solving P d = dE turns
    the stiff quartic flow into a Newton-scaled descent; without it the
    step-size restriction is around 1e5 times the collective timescale.
    """
    W = cotangent_weights(immersion.mesh, immersion.positions)
    deg = np.asarray(W.sum(axis=1)).ravel()
    L = sparse.diags(deg) - W
    av = vertex_areas(immersion)
    area, _, bend = kern.terms(immersion.positions, sigma)
    f_rms = np.sqrt(max(bend, 0.0) / max(area, 1e-300))
    c_bend = 12.0 * sigma ** 4 * f_rms
    alpha = 1e-3 * np.mean(deg) / np.mean(av)
    P = (alpha * sparse.diags(av) + L
         + c_bend * (L @ sparse.diags(1.0 / av) @ L)).tocsc()
    return sparse_linalg.splu(P)


class StopRule:
    """Descent stopping: criticality below max(sigma^exponent, floor), or cap."""

    def __init__(self, grad_threshold_exponent=5.0, absolute_floor=0.0,
                 iteration_cap=500, check_every=1):
        self.grad_threshold_exponent = float(grad_threshold_exponent)
        self.absolute_floor = float(absolute_floor)
        self.iteration_cap = int(iteration_cap)
        self.check_every = max(1, int(check_every))

    def threshold(self, sigma):
        return max(sigma ** self.grad_threshold_exponent, self.absolute_floor)


class Schedule:
    """Strictly decreasing sigma values in (0, 1) with per-phase caps."""

    def __init__(self, sigmas, iteration_cap=300, grad_threshold_exponent=5.0,
                 absolute_floor=0.0, entropy_decrease_factor=1.0, check_every=1):
        self.sigmas = [float(s) for s in sigmas]
        if not self.sigmas:
            raise ValueError("schedule needs at least one sigma")
        if any(not (0.0 < s < 1.0) for s in self.sigmas):
            raise ValueError("sigmas must lie in (0, 1)")
        if any(b >= a for a, b in zip(self.sigmas, self.sigmas[1:])):
            raise ValueError("sigmas must be strictly decreasing")
        self.iteration_cap = int(iteration_cap)
        self.grad_threshold_exponent = float(grad_threshold_exponent)
        self.absolute_floor = float(absolute_floor)
        self.entropy_decrease_factor = float(entropy_decrease_factor)
        self.check_every = int(check_every)

    def stop_rule(self):
        return StopRule(self.grad_threshold_exponent, self.absolute_floor,
                        self.iteration_cap, self.check_every)

    @classmethod
    def default(cls, **kwargs):
        """Geometric, ratio 0.5, from 0.2 down to 0.0125."""
        return cls([0.2, 0.1, 0.05, 0.025, 0.0125], **kwargs)


class TraceRow:
    __slots__ = ("step", "sigma", "breakdown", "criticality", "entropy",
                 "step_size")

    def __init__(self, step, sigma, breakdown, criticality, entropy, step_size):
        self.step = step
        self.sigma = sigma
        self.breakdown = breakdown
        self.criticality = criticality
        self.entropy = entropy
        self.step_size = step_size


class RunTrace:
    """Append-only record of accepted steps plus phase-level entropy values."""

    def __init__(self):
        self.rows = []
        self.stalled = False
        self.entropy_violation = False
        self.phase_entropies = []

    def append(self, row):
        if self.rows and row.breakdown.sigma == self.rows[-1].breakdown.sigma:
            # energy must strictly decrease within a fixed-sigma phase
            assert row.breakdown.total < self.rows[-1].breakdown.total
        self.rows.append(row)

    def extend(self, other):
        self.rows.extend(other.rows)
        self.stalled = self.stalled or other.stalled
        self.entropy_violation = self.entropy_violation or other.entropy_violation
        self.phase_entropies.extend(other.phase_entropies)

    @property
    def last_step_size(self):
        return self.rows[-1].step_size if self.rows else None

    def __len__(self):
        return len(self.rows)


def _breakdown(kern, positions, sigma):
    area, length, bending = kern.terms(positions, sigma)
    return EnergyBreakdown(sigma, area, length, bending)


def descend(immersion, sigma, stop_rule=None, dictionary=None,
            initial_step=None, step_scale=1.0, evaluate_criticality=True,
            start_step_index=0, precondition=True, warn_on_stall=True):
    """Projected pseudo-gradient descent with Armijo backtracking.

    The descent direction is the energy differential preconditioned by a
    sparse Hessian surrogate (see _build_preconditioner); boundary vertices
    are re-projected onto N (all vertices onto M) after every trial, and
    accepted steps strictly decrease the total energy.  Stops at the
    criticality threshold or the iteration cap.  A stall of the line search
    is reported via a LineSearchStall warning and the trace flag.
    """
    if sigma <= 0.0:
        raise ValueError("descent requires sigma > 0")
    stop_rule = stop_rule or StopRule()
    if dictionary is None:
        dictionary = standard_dictionary(immersion)
    kern = get_kernel(immersion)
    trace = RunTrace()
    state = immersion
    eta = initial_step
    total = kern.total(state.positions, sigma)

    def criticality(st, grad_vecs):
        return criticality_norm(st, sigma, dictionary, _grad=grad_vecs)

    def direction(st, grad_vecs, solver):
        if solver is None:
            return grad_vecs
        d = np.column_stack([solver.solve(np.ascontiguousarray(grad_vecs[:, k]))
                             for k in range(grad_vecs.shape[1])])
        # fall back to the raw differential if the solve lost positivity
        return d if float(np.sum(d * grad_vecs)) > 0.0 else grad_vecs

    solver = _build_preconditioner(state, sigma, kern) if precondition else None
    since_refresh = 0
    grad = gradient(state, sigma).vectors
    crit = criticality(state, grad) if evaluate_criticality else np.nan
    for _ in range(stop_rule.iteration_cap):
        if float(np.sum(grad * grad)) == 0.0:
            break
        if evaluate_criticality and crit < stop_rule.threshold(sigma):
            break
        step = direction(state, grad, solver)
        slope = float(np.sum(grad * step))
        if eta is None:
            if precondition:
                eta = 1.0
            else:
                scale = state.mean_edge_length()
                eta = 0.1 * scale / max(np.sqrt(slope / len(grad)), 1e-30)
        eta = min(2.0 * eta, MAX_STEP) if precondition else 2.0 * eta
        accepted = False
        while eta * step_scale >= MIN_STEP:
            trial = state.project_positions(
                state.positions - eta * step_scale * step)
            trial_total = kern.total(trial, sigma)
            if (trial_total < total
                    and trial_total <= total - ARMIJO * eta * step_scale * slope):
                accepted = True
                break
            eta *= BACKTRACK
        if not accepted:
            if warn_on_stall:
                warnings.warn("line search found no decrease", LineSearchStall)
            trace.stalled = True
            break
        state = Immersion(state.mesh, trial, state.ambient, state.constraint,
                          state.degeneracy_floor, validate=False)
        try:
            state.validate()
        except DegenerateFace as exc:
            exc.state = state
            raise
        total = trial_total
        since_refresh += 1
        if solver is not None and since_refresh >= PRECOND_REFRESH:
            solver = _build_preconditioner(state, sigma, kern)
            since_refresh = 0
        grad = gradient(state, sigma).vectors
        crit = criticality(state, grad) if evaluate_criticality else np.nan
        bd = _breakdown(kern, state.positions, sigma)
        trace.append(TraceRow(start_step_index + len(trace), sigma, bd,
                              float(crit), bd.entropy(), eta * step_scale))
    return state, trace


def continuation(immersion, schedule, dictionary=None):
    """Run descend at each sigma of the schedule, warm-starting each phase.

    Records the entropy quantity after every phase and flags
    ``entropy_violation`` when it fails to decrease by the configured factor
    over the last three phases.
    """
    state = immersion
    trace = RunTrace()
    if dictionary is None:
        dictionary = standard_dictionary(immersion)
    eta = None
    stop_rule = schedule.stop_rule()
    for sigma in schedule.sigmas:
        state, phase = descend(state, sigma, stop_rule=stop_rule,
                               dictionary=dictionary, initial_step=eta,
                               start_step_index=len(trace))
        eta = phase.last_step_size or eta
        trace.extend(phase)
        kern = get_kernel(state)
        entropy = _breakdown(kern, state.positions, sigma).entropy()
        trace.phase_entropies.append((sigma, entropy))
        ents = [e for _, e in trace.phase_entropies]
        if len(ents) >= 4 and ents[-1] > schedule.entropy_decrease_factor * ents[-4]:
            trace.entropy_violation = True
    return state, trace


class Sweepout:
    """A one-parameter family of immersions sharing a single domain mesh."""

    def __init__(self, immersions, endpoint_policy="fixed"):
        if len(immersions) < 2:
            raise ValueError("a sweepout needs at least two slices")
        mesh = immersions[0].mesh
        if any(s.mesh is not mesh for s in immersions):
            raise ValueError("all slices must share one SurfaceMesh")
        if endpoint_policy not in ("fixed", "free"):
            raise ValueError("endpoint policy must be 'fixed' or 'free'")
        self.slices = list(immersions)
        self.endpoint_policy = endpoint_policy

    @property
    def ts(self):
        T = len(self.slices) - 1
        return np.asarray([i / T for i in range(T + 1)])

    def taper(self):
        """Per-slice deformation scale; vanishes at fixed endpoints."""
        if self.endpoint_policy == "free":
            return np.ones(len(self.slices))
        t = np.sin(np.pi * self.ts)
        t[0] = t[-1] = 0.0
        return t


def minmax_sweep(sweepout, sigma, deformation_rounds=3, steps_per_slice=8,
                 refine_stop_rule=None, dictionary=None):
    """Push the max-energy slice down by tapered per-slice descent rounds.

    Each round descends every slice a bounded number of steps (an isotopy of
    the family: slice-wise, endpoint-preserving), then re-evaluates the max.
    Returns (beta_estimate, argmax index, refined critical immersion,
    deformed Sweepout).
    """
    if sigma <= 0.0:
        raise ValueError("min-max requires sigma > 0")
    slices = list(sweepout.slices)
    taper = sweepout.taper()
    kern = get_kernel(slices[0])
    if dictionary is None:
        dictionary = standard_dictionary(slices[0])

    def family_max():
        totals = [kern.total(s.positions, sigma) for s in slices]
        idx = int(np.argmax(totals))
        return totals[idx], idx

    beta, argmax = family_max()
    slice_rule = StopRule(iteration_cap=steps_per_slice)
    for _ in range(deformation_rounds):
        new_slices = []
        for i, s in enumerate(slices):
            if taper[i] == 0.0:
                new_slices.append(s)
                continue
            try:
                out, _ = descend(s, sigma, stop_rule=slice_rule,
                                 dictionary=dictionary, step_scale=float(taper[i]),
                                 evaluate_criticality=False, warn_on_stall=False)
            except DegenerateFace as exc:
                raise NonCompactFamily(i, f"slice {i} degenerated: {exc}") from exc
            new_slices.append(out)
        assert len(new_slices) == len(slices)
        if sweepout.endpoint_policy == "fixed":
            assert new_slices[0] is slices[0] and new_slices[-1] is slices[-1]
        slices = new_slices
        new_beta, argmax = family_max()
        assert new_beta <= beta + 1e-12
        beta = new_beta
    refined, _ = descend(slices[argmax], sigma,
                         stop_rule=refine_stop_rule or StopRule(),
                         dictionary=dictionary)
    return beta, argmax, refined, Sweepout(slices, sweepout.endpoint_policy)


def struwe_select(samples, threshold=0.1, beta_tolerance=1e-9):
    """Select sigmas where sigma log(1/sigma) * (d beta / d sigma) is small.

    ``samples`` is a list of (sigma_i, beta_i) on a strictly decreasing
    sigma grid.  Returns a list of (index, difference quotient) for the
    selected indices; index 0 has no one-sided quotient and is never
    selected.
    """
    sigmas = np.asarray([s for s, _ in samples], dtype=float)
    betas = np.asarray([b for _, b in samples], dtype=float)
    if np.any(np.diff(sigmas) >= 0):
        raise ValueError("sigma grid must be strictly decreasing")
    drops = betas[:-1] - betas[1:]
    if np.any(drops < -beta_tolerance):
        warnings.warn("beta decreases in sigma beyond tolerance", NonMonotoneBeta)
    selected = []
    for i in range(1, len(sigmas)):
        quotient = (betas[i - 1] - betas[i]) / (sigmas[i - 1] - sigmas[i])
        weight = sigmas[i] * np.log(1.0 / sigmas[i]) * quotient
        if weight <= threshold:
            selected.append((i, float(quotient)))
    return selected


def horizontal_disk_sweepout(refinement, slice_count, ambient, constraint,
                             z_range=(-0.9, 0.9), min_radius=0.05):
    """Horizontal-disk sweepout of the unit ball with boundaries on N = S^2.

    Slice at height c is the flat disk of radius sqrt(1 - c^2) (floored at
    ``min_radius`` to keep faces nondegenerate near the poles).
    """
    surf, pos = meshmod.disk(refinement)
    slices = []
    for c in np.linspace(z_range[0], z_range[1], slice_count):
        r = max(np.sqrt(max(1.0 - c * c, 0.0)), min_radius)
        # keep the boundary circle on the sphere when the radius is floored
        c = np.sign(c) * np.sqrt(1.0 - r * r) if r * r + c * c > 1.0 else c
        p = pos * r
        p[:, 2] = c
        slices.append(Immersion(surf, p, ambient, constraint))
    return Sweepout(slices, "fixed")
