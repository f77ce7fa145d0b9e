"""Truncated Fock-space machinery shared by the analytic and simulation layers.

Basis ordering of every dense matrix is (s1, s2) x |n_c> x |n_r>, with the
internal states ordered as in ``SPIN_STATES`` and s = +1 the upper level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .model import TWO_PI, ModeParams

SPIN_STATES = ((1, 1), (1, -1), (-1, 1), (-1, -1))


class TruncationError(RuntimeError):
    """A truncated Fock space was too small for the requested evolution."""


@dataclass(frozen=True)
class FockConfig:
    """Retained dimensions n_max_* plus working padding pad_*.

    States live in the first n_max levels; operators are built on
    n_max + pad levels so that truncation artefacts stay at the edge.  A mode
    with n_max = 1 and pad = 0 is frozen.
    """

    n_max_c: int = 1
    n_max_r: int = 1
    pad_c: int = 0
    pad_r: int = 0
    convergence_margin: int = 8
    leak_tol: float = 1e-10

    def __post_init__(self):
        if self.n_max_c < 1 or self.n_max_r < 1:
            raise ValueError("truncation dimensions must be >= 1")
        if self.pad_c < 0 or self.pad_r < 0:
            raise ValueError("padding must be non-negative")

    @property
    def dim_c(self) -> int:
        return self.n_max_c + self.pad_c

    @property
    def dim_r(self) -> int:
        return self.n_max_r + self.pad_r

    def active(self, mode: str) -> bool:
        return (self.dim_c if mode == "c" else self.dim_r) > 1

    def enlarged(self, extra: int | None = None) -> "FockConfig":
        """Same retained space, working space raised by the convergence margin."""
        k = self.convergence_margin if extra is None else extra
        return FockConfig(
            self.n_max_c, self.n_max_r,
            self.pad_c + (k if self.dim_c > 1 else 0),
            self.pad_r + (k if self.dim_r > 1 else 0),
            self.convergence_margin, self.leak_tol,
        )

    def to_dict(self) -> dict:
        return {
            "n_max_c": self.n_max_c, "n_max_r": self.n_max_r,
            "pad_c": self.pad_c, "pad_r": self.pad_r,
            "convergence_margin": self.convergence_margin,
        }


def padding_for(n_max: int, amplitude: float) -> int:
    """Working padding for states up to n_max displaced by up to ``amplitude``.

    A Fock state |n> displaced by beta spreads over (sqrt(n) +- |beta|)^2 with
    a width of about 2 sqrt(n) |beta|; five widths plus a fixed margin keep
    the edge weight far below the leak tolerance.
    """
    if n_max <= 1 and amplitude == 0:
        return 0
    reach = math.sqrt(n_max) + abs(amplitude)
    return max(8, int(math.ceil(reach * reach + 10 * reach + 20)) - n_max)


# ---------------------------------------------------------------- operators

def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1)


def number(dim: int) -> np.ndarray:
    return np.arange(dim, dtype=float)


@lru_cache(maxsize=64)
def _position_eig(dim: int):
    x = annihilation(dim)
    x = x + x.T
    vals, vecs = np.linalg.eigh(x)
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return vals, vecs


def kick_matrix(p: float, dim: int) -> np.ndarray:
    """exp(-i p (a + a^dag)) on the truncated space, exactly unitary."""
    if dim == 1 or p == 0:
        return np.eye(dim, dtype=complex)
    vals, vecs = _position_eig(dim)
    return (vecs * np.exp(-1j * p * vals)) @ vecs.T


def kick_apply(p: float, state: np.ndarray) -> np.ndarray:
    """kick_matrix(p) @ state without forming the matrix."""
    vals, vecs = _position_eig(state.shape[0])
    phase = np.exp(-1j * p * vals)
    if state.ndim == 2:
        phase = phase[:, None]
    return vecs @ (phase * (vecs.T @ state))


def rotation_phases(angle: float, dim: int) -> np.ndarray:
    """Diagonal of exp(-i angle a^dag a)."""
    return np.exp(-1j * angle * number(dim))


def displacement(beta: complex, dim: int) -> np.ndarray:
    """D(beta) = exp(beta a^dag - beta* a) via its position-operator form."""
    if dim == 1:
        return np.eye(1, dtype=complex)
    a = annihilation(dim)
    gen = beta * a.T - np.conj(beta) * a
    vals, vecs = np.linalg.eigh(1j * gen)
    return (vecs * np.exp(-1j * vals)) @ vecs.conj().T


# -------------------------------------------------------------------- states

def coherent_state(alpha: complex, n_max: int, dim: int | None = None) -> np.ndarray:
    """|alpha> on the first n_max levels (renormalised), zero-padded to dim."""
    dim = n_max if dim is None else dim
    n = np.arange(n_max)
    logamp = -0.5 * abs(alpha) ** 2 - 0.5 * np.array([math.lgamma(k + 1) for k in n])
    if alpha == 0:
        psi = np.zeros(n_max, dtype=complex)
        psi[0] = 1.0
    else:
        psi = np.exp(logamp + n * np.log(complex(alpha)))
    psi = psi / np.linalg.norm(psi)
    out = np.zeros(dim, dtype=complex)
    out[:n_max] = psi
    return out


def thermal_populations(nbar: float, n_terms: int) -> np.ndarray:
    """p_n = nbar^n / (nbar + 1)^(n+1), n < n_terms, not renormalised."""
    n = np.arange(n_terms)
    if nbar == 0:
        p = np.zeros(n_terms)
        p[0] = 1.0
        return p
    return np.exp(n * math.log(nbar / (nbar + 1.0)) - math.log(nbar + 1.0))


def thermal_tail(nbar: float, n_terms: int) -> float:
    """Population of levels n >= n_terms."""
    return 0.0 if nbar == 0 else (nbar / (nbar + 1.0)) ** n_terms


def thermal_terms_for(nbar: float, tail: float = 1e-8) -> int:
    if nbar == 0:
        return 1
    return int(math.ceil(math.log(tail) / math.log(nbar / (nbar + 1.0))))


def thermal_state(nbar: float, n_max: int, dim: int | None = None, renormalize: bool = True) -> np.ndarray:
    dim = n_max if dim is None else dim
    p = thermal_populations(nbar, n_max)
    if renormalize:
        p = p / p.sum()
    rho = np.zeros((dim, dim))
    rho[np.arange(n_max), np.arange(n_max)] = p
    return rho


def pure_density(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


# --------------------------------------------------------------- gate object

@dataclass
class GateUnitary:
    """A two-qubit gate on (2 qubits) x (truncated COM) x (truncated stretch).

    Spin-diagonal, mode-separable evolutions keep ``blocks``: for each
    internal state in SPIN_STATES a pair (U_c, U_r) of motional matrices, the
    internal-state phase folded into U_c.  General evolutions keep ``dense``.
    ``T`` is the time span represented, used for the ideal reference.
    """

    cfg: FockConfig
    T: float
    modes: ModeParams
    blocks: list | None = None
    dense: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dims(self) -> tuple[int, int]:
        return self.cfg.dim_c, self.cfg.dim_r

    @property
    def matrix(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        dc, dr = self.dims
        d = dc * dr
        out = np.zeros((4 * d, 4 * d), dtype=complex)
        for i, (uc, ur) in enumerate(self.blocks):
            out[i * d:(i + 1) * d, i * d:(i + 1) * d] = np.kron(uc, ur)
        return out

    def spin_block(self, i: int) -> np.ndarray:
        """Motional matrix for internal state SPIN_STATES[i] -> same state."""
        if self.blocks is not None:
            uc, ur = self.blocks[i]
            return np.kron(uc, ur)
        d = self.dims[0] * self.dims[1]
        return self.dense[i * d:(i + 1) * d, i * d:(i + 1) * d]

    def unitarity_deficit(self) -> float:
        """max |U^dag U - 1| over the retained columns, i.e. away from the edge."""
        dc, dr = self.dims
        keep_c, keep_r = np.arange(self.cfg.n_max_c), np.arange(self.cfg.n_max_r)
        retained = (keep_c[:, None] * dr + keep_r[None, :]).ravel()
        if self.blocks is not None:
            worst = 0.0
            for uc, ur in self.blocks:
                for u, keep in ((uc, keep_c), (ur, keep_r)):
                    g = u[:, keep].conj().T @ u[:, keep]
                    worst = max(worst, np.abs(g - np.eye(len(keep))).max())
            return float(worst)
        d = dc * dr
        cols = np.concatenate([retained + i * d for i in range(4)])
        u = self.dense[:, cols]
        return float(np.abs(u.conj().T @ u - np.eye(len(cols))).max())

    def save_text(self, path, retained_only: bool = True) -> None:
        """Row-major "re,im" dump followed by nothing else; metadata goes to path + '.json'."""
        import json

        m = self.matrix
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for row in m:
                fh.write(" ".join(f"{z.real:.17g},{z.imag:.17g}" for z in row) + "\n")
        meta = {"T": self.T, "cfg": self.cfg.to_dict(), "basis": "(s1,s2) x n_c x n_r",
                "spin_order": SPIN_STATES, **{k: v for k, v in self.meta.items() if _jsonable(v)}}
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)


def _jsonable(v) -> bool:
    return isinstance(v, (str, int, float, bool, list, tuple, dict)) or v is None


def edge_leak(u: np.ndarray, n_keep: int, edge: int = 4) -> float:
    """Largest weight that a retained basis column puts on the top ``edge`` levels."""
    dim = u.shape[0]
    if dim <= n_keep or dim <= edge:
        return 0.0
    cols = u[dim - edge:, :n_keep]
    return float((np.abs(cols) ** 2).sum(axis=0).max())


def free_rotation(modes: ModeParams, T: float, cfg: FockConfig) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of exp(-i nu_c T a^dag a) and exp(-i nu_r T b^dag b)."""
    return (rotation_phases(TWO_PI * modes.nu_c * T, cfg.dim_c),
            rotation_phases(TWO_PI * modes.nu_r * T, cfg.dim_r))
