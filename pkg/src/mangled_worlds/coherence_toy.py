"""Two-world block density matrix under a random Hamiltonian.

The Hilbert space splits into a large world ``L`` and a small world ``s``.
The density matrix and the Hamiltonian are carried as 2x2 grids of blocks,
and ``i drho/dt = [H, rho]`` (hbar = 1) is written out block by block.
With relative size ``delta`` (``tr rho_ss = delta**2 tr rho_LL``) and residual
coherence ``epsilon`` the large world barely feels the small one, while the
small world's own drive is swamped by the off-diagonal terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from scipy.linalg import expm

from .errors import IndeterminateRatioError, StabilityError

# RK4 is stable on the imaginary axis up to |lambda dt| = 2 sqrt(2); the
# commutator's eigenvalues reach 2 ||H||.
STABILITY_LIMIT = math.sqrt(2.0)
HERMITIAN_TOL = 1e-12


def _spectral_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2)) if a.size else 0.0


def _random_complex(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


@dataclass(frozen=True)
class BlockState:
    block_LL: np.ndarray
    block_Ls: np.ndarray
    block_sL: np.ndarray
    block_ss: np.ndarray

    @property
    def dims(self) -> tuple[int, int]:
        return self.block_LL.shape[0], self.block_ss.shape[0]

    @property
    def trace_LL(self) -> float:
        return float(np.trace(self.block_LL).real)

    @property
    def trace_ss(self) -> float:
        return float(np.trace(self.block_ss).real)

    @property
    def trace(self) -> float:
        return self.trace_LL + self.trace_ss

    @property
    def offdiag_norm(self) -> float:
        """Magnitude of the coherence block: its largest singular value."""
        return _spectral_norm(self.block_Ls)

    def hermiticity_error(self) -> float:
        return max(
            float(np.max(np.abs(self.block_sL - self.block_Ls.conj().T), initial=0.0)),
            float(np.max(np.abs(self.block_LL - self.block_LL.conj().T), initial=0.0)),
            float(np.max(np.abs(self.block_ss - self.block_ss.conj().T), initial=0.0)),
        )

    def full(self) -> np.ndarray:
        return np.block([[self.block_LL, self.block_Ls], [self.block_sL, self.block_ss]])

    @classmethod
    def from_full(cls, rho: np.ndarray, d_L: int) -> "BlockState":
        return cls(rho[:d_L, :d_L].copy(), rho[:d_L, d_L:].copy(), rho[d_L:, :d_L].copy(), rho[d_L:, d_L:].copy())


@dataclass(frozen=True)
class BlockHamiltonian:
    H_LL: np.ndarray
    H_Ls: np.ndarray
    H_sL: np.ndarray
    H_ss: np.ndarray

    def __post_init__(self):
        if self.H_Ls.shape != (self.H_LL.shape[0], self.H_ss.shape[0]):
            raise ValueError("H_Ls must be d_L x d_s")
        if np.max(np.abs(self.H_sL - self.H_Ls.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ValueError("H_sL must be the conjugate transpose of H_Ls")
        for name in ("H_LL", "H_ss"):
            h = getattr(self, name)
            if np.max(np.abs(h - h.conj().T), initial=0.0) > HERMITIAN_TOL:
                raise ValueError(f"{name} must be Hermitian")

    def block_norms(self) -> tuple[float, float, float]:
        return _spectral_norm(self.H_LL), _spectral_norm(self.H_Ls), _spectral_norm(self.H_ss)

    def is_comparable(self, band: float = 2.0) -> bool:
        """True when all nonzero block norms lie within a factor ``band``."""
        norms = [n for n in self.block_norms() if n > 0]
        return not norms or max(norms) <= band * min(norms)

    def full(self) -> np.ndarray:
        return np.block([[self.H_LL, self.H_Ls], [self.H_sL, self.H_ss]])

    def norm(self) -> float:
        return _spectral_norm(self.full())


def random_hamiltonian(d_L: int, d_s: int, seed: int, coupling: float = 1.0) -> BlockHamiltonian:
    """Gaussian Hermitian blocks, each rescaled to spectral norm 1.

    ``coupling`` scales the off-diagonal pair; 0 decouples the worlds.
    """
    rng = np.random.default_rng(seed)

    def hermitian(d):
        a = _random_complex(rng, d, d)
        h = 0.5 * (a + a.conj().T)
        return h / _spectral_norm(h)

    h_ll = hermitian(d_L)
    h_ss = hermitian(d_s)
    h_ls = _random_complex(rng, d_L, d_s)
    h_ls = coupling * h_ls / _spectral_norm(h_ls)
    return BlockHamiltonian(h_ll, h_ls, h_ls.conj().T.copy(), h_ss)


def init_two_worlds(
    d_L: int, d_s: int, delta: float, epsilon: float, seed: int, rank: int = 1
) -> BlockState:
    """Random state with ``tr rho_ss / tr rho_LL = delta**2`` and coherence ``epsilon``.

    The coherence block's largest singular value is
    ``epsilon * sqrt(tr rho_LL * tr rho_ss)``.  ``epsilon = 0`` gives a
    block-diagonal state.  Each diagonal block is a normalised Wishart draw
    of the given ``rank`` (capped at the block size); the default rank 1
    puts each world in a pure state.  Mixed blocks partly commute with any
    Hamiltonian, which shrinks their own drive and inflates the influence
    ratios by a factor of order 1.
    """
    if d_L < 1 or d_s < 1:
        raise ValueError("block dimensions must be at least 1")
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not (0.0 <= epsilon < 1.0):
        raise ValueError(f"epsilon must lie in [0, 1), got {epsilon}")
    if rank < 1:
        raise ValueError("rank must be at least 1")
    rng = np.random.default_rng(seed)

    def density(d):
        a = _random_complex(rng, d, min(rank, d))
        rho = a @ a.conj().T
        return rho / np.trace(rho).real

    tr_ll = 1.0 / (1.0 + delta**2)
    tr_ss = 1.0 - tr_ll
    rho_ll = tr_ll * density(d_L)
    rho_ss = tr_ss * density(d_s)
    c = _random_complex(rng, d_L, d_s)
    rho_ls = epsilon * math.sqrt(tr_ll * tr_ss) * c / _spectral_norm(c)
    return BlockState(rho_ll, rho_ls, rho_ls.conj().T.copy(), rho_ss)


def block_derivative(state: BlockState, H: BlockHamiltonian) -> BlockState:
    """``drho/dt`` block by block, from ``i drho/dt = H rho - rho H``."""
    r_ll, r_ls, r_sl, r_ss = state.block_LL, state.block_Ls, state.block_sL, state.block_ss
    h_ll, h_ls, h_sl, h_ss = H.H_LL, H.H_Ls, H.H_sL, H.H_ss
    d_ll = (h_ll @ r_ll - r_ll @ h_ll) + (h_ls @ r_sl - r_ls @ h_sl)
    d_ss = (h_ss @ r_ss - r_ss @ h_ss) + (h_sl @ r_ls - r_sl @ h_ls)
    d_ls = (h_ll @ r_ls - r_ll @ h_ls) + (h_ls @ r_ss - r_ls @ h_ss)
    d_sl = (h_sl @ r_ll - r_sl @ h_ll) + (h_ss @ r_sl - r_ss @ h_sl)
    return BlockState(-1j * d_ll, -1j * d_ls, -1j * d_sl, -1j * d_ss)


def _axpy(a: BlockState, h: float, b: BlockState) -> BlockState:
    return BlockState(
        a.block_LL + h * b.block_LL,
        a.block_Ls + h * b.block_Ls,
        a.block_sL + h * b.block_sL,
        a.block_ss + h * b.block_ss,
    )


def _check_conformable(state: BlockState, H: BlockHamiltonian):
    if H.H_LL.shape != state.block_LL.shape or H.H_ss.shape != state.block_ss.shape:
        raise ValueError(f"Hamiltonian blocks {H.H_LL.shape}/{H.H_ss.shape} do not match state dims {state.dims}")


def rk4_step(state: BlockState, H: BlockHamiltonian, dt: float) -> BlockState:
    k1 = block_derivative(state, H)
    k2 = block_derivative(_axpy(state, dt / 2, k1), H)
    k3 = block_derivative(_axpy(state, dt / 2, k2), H)
    k4 = block_derivative(_axpy(state, dt, k3), H)
    out = state
    for k, w in ((k1, 1.0), (k2, 2.0), (k3, 2.0), (k4, 1.0)):
        out = _axpy(out, dt * w / 6.0, k)
    return out


def check_step(H: BlockHamiltonian, dt: float) -> float:
    """Return ``dt * ||H||``; raise if it exceeds the RK4 stability limit."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    product = dt * H.norm()
    if product > STABILITY_LIMIT:
        raise StabilityError(f"dt * ||H|| = {product:.4g} exceeds the stability limit {STABILITY_LIMIT:.4g}")
    return product


def trajectory(state: BlockState, H: BlockHamiltonian, dt: float, steps: int) -> Iterator[BlockState]:
    """Yield the state after each of ``steps`` RK4 steps (the start is not yielded)."""
    _check_conformable(state, H)
    check_step(H, dt)
    if steps < 1:
        raise ValueError("steps must be positive")
    for _ in range(steps):
        state = rk4_step(state, H, dt)
        yield state


def evolve(state: BlockState, H: BlockHamiltonian, dt: float, steps: int) -> BlockState:
    for state in trajectory(state, H, dt, steps):
        pass
    return state


def evolve_full_exact(state: BlockState, H: BlockHamiltonian, t: float) -> BlockState:
    """Reference propagation ``U rho U^dagger`` with ``U = exp(-i H t)`` on the full matrix."""
    _check_conformable(state, H)
    u = expm(-1j * t * H.full())
    return BlockState.from_full(u @ state.full() @ u.conj().T, state.dims[0])


class InfluenceRatios(NamedTuple):
    large_world_ratio: float
    small_world_ratio: float


def influence_ratios(state: BlockState, H: BlockHamiltonian) -> InfluenceRatios:
    """Cross-block drive over own-block drive for each diagonal block.

    Norms are spectral.  A vanishing own-block drive (the block commutes with
    its Hamiltonian) leaves the ratio undefined.
    """
    _check_conformable(state, H)
    r_ll, r_ls, r_sl, r_ss = state.block_LL, state.block_Ls, state.block_sL, state.block_ss
    own_l = _spectral_norm(H.H_LL @ r_ll - r_ll @ H.H_LL)
    own_s = _spectral_norm(H.H_ss @ r_ss - r_ss @ H.H_ss)
    cross_l = _spectral_norm(H.H_Ls @ r_sl - r_ls @ H.H_sL)
    cross_s = _spectral_norm(H.H_sL @ r_ls - r_sl @ H.H_Ls)
    h_l, _, h_s = H.block_norms()
    if own_l <= 1e-14 * h_l * _spectral_norm(r_ll) or own_s <= 1e-14 * h_s * _spectral_norm(r_ss):
        raise IndeterminateRatioError("a diagonal block commutes with its Hamiltonian; its own drive vanishes")
    return InfluenceRatios(cross_l / own_l, cross_s / own_s)


def mean_influence_ratios(
    d_L: int, d_s: int, delta: float, epsilon: float, seeds=range(20)
) -> InfluenceRatios:
    """Influence ratios averaged over independent state and Hamiltonian draws."""
    rows = []
    for seed in seeds:
        state = init_two_worlds(d_L, d_s, delta, epsilon, seed)
        H = random_hamiltonian(d_L, d_s, seed + 1_000_003)
        rows.append(influence_ratios(state, H))
    large, small = np.mean(np.array(rows), axis=0)
    return InfluenceRatios(float(large), float(small))
