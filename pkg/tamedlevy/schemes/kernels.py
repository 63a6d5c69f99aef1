"""
One-step kernels. Each takes the states of P paths, shape (P, d), and the
noise of one grid cell for the same P paths, and returns the next states.

All kernels share the continuous part of the step, computed in the same
order, and add jump terms only to the rows that saw a jump in the cell.
A kernel therefore reproduces a simpler one bit for bit whenever its extra
terms are absent.
"""
from typing import Callable, Tuple

import numpy as np

from tamedlevy.noise.models import Cell
from tamedlevy.problems.models import SdeProblem
from tamedlevy.schemes.models import SchemeKind, SchemeSpec
from tamedlevy.taming.utils import tame_drift

StepKernel = Callable[[SdeProblem, SchemeSpec, np.ndarray, Cell], np.ndarray]


def _euler_part(
    problem: SdeProblem,
    spec: SchemeSpec,
    x: np.ndarray,
    cell: Cell,
    tamed: bool = True,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    h = cell.h
    drift = problem.drift(x)
    if tamed:
        drift = tame_drift(drift, spec.taming)
    if spec.compensator is not None:
        drift = drift - spec.compensator(x)
    sigma = problem.diffusion(x)
    dw = cell.increments
    if dw.shape[1] == 1:
        noise = sigma[:, :, 0] * dw
    else:
        noise = np.einsum("pij,pj->pi", sigma, dw)
    nxt = x + drift * h + noise
    return nxt, sigma, dw


def _milstein_correction(
    problem: SdeProblem,
    x: np.ndarray,
    sigma: np.ndarray,
    dw: np.ndarray,
    h: float,
) -> np.ndarray:
    """
    ½ Σ_{j,k} Σ_u σ^(u,j) ∂σ^(i,k)/∂x^u (Δw^j Δw^k - h 1{j=k}).
    """
    jac = problem.diffusion_jacobian(x)
    if dw.shape[1] == 1:
        if x.shape[1] == 1:
            lsigma = sigma[:, :, 0] * jac[:, :, 0, 0]
        else:
            lsigma = np.einsum("pu,piu->pi", sigma[:, :, 0], jac[:, :, 0])
        return 0.5 * lsigma * (dw * dw - h)
    # lsigma[p, i, j, k] = Σ_u σ[p, u, j] ∂σ^(i,k)/∂x^u
    lsigma = np.einsum("puj,piku->pijk", sigma, jac)
    iterated = dw[:, :, np.newaxis] * dw[:, np.newaxis, :] - h * np.eye(
        dw.shape[1]
    )
    return 0.5 * np.einsum("pijk,pjk->pi", lsigma, iterated)


def _milstein_part(
    problem: SdeProblem,
    spec: SchemeSpec,
    x: np.ndarray,
    cell: Cell,
    tamed: bool = True,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    nxt, sigma, dw = _euler_part(problem, spec, x, cell, tamed=tamed)
    nxt = nxt + _milstein_correction(problem, x, sigma, dw, cell.h)
    return nxt, sigma, dw


def _cell_events(cell: Cell):
    """
    Flattens the jumps of a cell into per-event arrays: the row each event
    belongs to, its mark and the Brownian value at its time, in row order
    and time order within a row.
    """
    rows, marks, brownian = [], [], []
    for row in sorted(cell.jumps):
        for event in cell.jumps[row]:
            rows.append(row)
            marks.append(event.mark)
            brownian.append(event.brownian_at_jump)
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(marks, dtype=float),
        np.asarray(brownian, dtype=float),
    )


def _ordered_pairs(cell: Cell) -> Tuple[np.ndarray, np.ndarray]:
    """
    Event index pairs (i, j) with i < j inside the same row.
    """
    firsts, seconds = [], []
    offset = 0
    for row in sorted(cell.jumps):
        count = len(cell.jumps[row])
        i, j = np.triu_indices(count, k=1)
        firsts.append(i + offset)
        seconds.append(j + offset)
        offset += count
    if not firsts:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(firsts), np.concatenate(seconds)


def step_tamed_euler(
    problem: SdeProblem, spec: SchemeSpec, state: np.ndarray, cell: Cell
) -> np.ndarray:
    nxt, _, _ = _euler_part(problem, spec, state, cell)
    if not cell.has_jumps:
        return nxt
    rows, marks, _ = _cell_events(cell)
    jumps = np.zeros_like(nxt)
    np.add.at(jumps, rows, problem.jump.coefficient(state[rows], marks))
    touched = np.unique(rows)
    nxt[touched] += jumps[touched]
    return nxt


def step_tamed_milstein_continuous(
    problem: SdeProblem, spec: SchemeSpec, state: np.ndarray, cell: Cell
) -> np.ndarray:
    nxt, _, _ = _milstein_part(problem, spec, state, cell)
    return nxt


def step_tamed_milstein_jump_1d(
    problem: SdeProblem, spec: SchemeSpec, state: np.ndarray, cell: Cell
) -> np.ndarray:
    """
    Adds to the continuous Milstein step, for each path with jumps at
    τ_1 < ... < τ_k in the cell [t_l, t_l + h):

        Σ_i γ(x, z_i)
        + Σ_i {σ(x + γ(x, z_i)) - σ(x)} (w(t_l + h) - w(τ_i))
        + Σ_i ∂γ/∂x(x, z_i) σ(x) (w(τ_i) - w(t_l))
        + Σ_j Σ_{i<j} {γ(x + γ(x, z_i), z_j) - γ(x, z_j)}
    """
    nxt, _, _ = _milstein_part(problem, spec, state, cell)
    if not cell.has_jumps:
        return nxt
    jump = problem.jump
    rows, marks, brownian = _cell_events(cell)
    x = state[rows]
    gamma = jump.coefficient(x, marks)
    sigma = problem.diffusion(x)
    after = brownian - cell.right[rows]
    before = brownian - cell.left[rows]
    terms = gamma - np.einsum(
        "eij,ej->ei", problem.diffusion(x + gamma) - sigma, after
    )
    terms = terms + np.einsum(
        "eiu,euj,ej->ei", jump.coefficient_jacobian(x, marks), sigma, before
    )
    jumps = np.zeros_like(nxt)
    np.add.at(jumps, rows, terms)

    first, second = _ordered_pairs(cell)
    if first.size:
        shifted = jump.coefficient(x[first] + gamma[first], marks[second])
        np.add.at(jumps, rows[second], shifted - gamma[second])

    touched = np.unique(rows)
    nxt[touched] += jumps[touched]
    return nxt


def step_tamed_milstein_jump_commutative(
    problem: SdeProblem, spec: SchemeSpec, state: np.ndarray, cell: Cell
) -> np.ndarray:
    """
    Adds to the continuous Milstein step, for paths with ΔN > 0 jumps of a
    mark-independent coefficient γ in the cell:

        γ ΔN + Σ_j {σ^(j)(x + γ) - σ^(j)(x)} ΔN Δw^j
        + ½ {γ(x + γ) - γ(x)} (ΔN² - ΔN)
    """
    nxt, sigma, dw = _milstein_part(problem, spec, state, cell)
    rows = np.flatnonzero(cell.jump_counts)
    if not rows.size:
        return nxt
    coefficient = problem.jump.coefficient
    x = state[rows]
    marks = np.zeros(rows.size)
    count = cell.jump_counts[rows].astype(float)[:, np.newaxis]
    gamma = coefficient(x, marks)
    shifted = x + gamma
    terms = gamma * count
    terms = terms + count * np.einsum(
        "pij,pj->pi", problem.diffusion(shifted) - sigma[rows], dw[rows]
    )
    terms = terms + 0.5 * (coefficient(shifted, marks) - gamma) * (
        count * count - count
    )
    nxt[rows] += terms
    return nxt


def step_untamed_milstein(
    problem: SdeProblem, spec: SchemeSpec, state: np.ndarray, cell: Cell
) -> np.ndarray:
    nxt, _, _ = _milstein_part(problem, spec, state, cell, tamed=False)
    return nxt


KERNELS = {
    SchemeKind.TAMED_EULER: step_tamed_euler,
    SchemeKind.TAMED_MILSTEIN_CONTINUOUS: step_tamed_milstein_continuous,
    SchemeKind.TAMED_MILSTEIN_JUMP_1D: step_tamed_milstein_jump_1d,
    SchemeKind.TAMED_MILSTEIN_JUMP_COMMUTATIVE: (
        step_tamed_milstein_jump_commutative
    ),
    SchemeKind.UNTAMED_MILSTEIN: step_untamed_milstein,
}
