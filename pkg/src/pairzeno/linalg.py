"""Dense complex linear algebra kernel for small multi-factor Hilbert spaces.

States and operators carry an explicit tensor-factor structure
(``factor_dims``); every routine addresses factors by index, so the factor
ordering chosen by the caller is the single source of truth. Everything here
is a pure function of its inputs; wrapped arrays are frozen after
construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

NORM_ATOL = 1e-12
HERMITIAN_ATOL = 1e-12
UNITARY_ATOL = 1e-10
ZERO_PROB = 1e-14
DIM_CAP = 2**16


class DimensionCapError(ValueError):
    """Raised when a register would exceed the supported Hilbert dimension."""


def check_dim_cap(dim: int) -> None:
    if dim > DIM_CAP:
        raise DimensionCapError(f"Hilbert dimension {dim} exceeds cap {DIM_CAP}")


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=complex)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class StateVector:
    """Unit-norm complex amplitude vector with explicit tensor structure."""

    amplitudes: np.ndarray
    factor_dims: tuple[int, ...]

    def __post_init__(self):
        amps = _freeze(np.asarray(self.amplitudes).reshape(-1))
        object.__setattr__(self, "amplitudes", amps)
        dims = tuple(int(d) for d in self.factor_dims)
        object.__setattr__(self, "factor_dims", dims)
        if any(d < 1 for d in dims):
            raise ValueError(f"factor dims must be positive, got {dims}")
        if math.prod(dims) != amps.size:
            raise ValueError(
                f"amplitude length {amps.size} != product of factor dims {dims}"
            )
        check_dim_cap(amps.size)
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_ATOL:
            raise ValueError(f"state norm {norm!r} deviates from 1 beyond {NORM_ATOL}")

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def n_factors(self) -> int:
        return len(self.factor_dims)

    @staticmethod
    def from_amplitudes(amps: Sequence[complex], factor_dims: Sequence[int],
                        normalize: bool = False) -> "StateVector":
        a = np.asarray(amps, dtype=complex).reshape(-1)
        if normalize:
            norm = np.linalg.norm(a)
            if norm == 0:
                raise ValueError("cannot normalize the zero vector")
            a = a / norm
        return StateVector(a, tuple(factor_dims))

    @staticmethod
    def basis(factor_dims: Sequence[int], occupations: Sequence[int]) -> "StateVector":
        """Computational basis state |occupations[0], occupations[1], ...>."""
        dims = tuple(int(d) for d in factor_dims)
        occ = tuple(int(o) for o in occupations)
        if len(occ) != len(dims):
            raise ValueError("one occupation number per factor required")
        if any(not 0 <= o < d for o, d in zip(occ, dims)):
            raise ValueError(f"occupations {occ} out of range for dims {dims}")
        index = 0
        for o, d in zip(occ, dims):
            index = index * d + o
        amps = np.zeros(math.prod(dims), dtype=complex)
        amps[index] = 1.0
        return StateVector(amps, dims)


@dataclass(frozen=True)
class Operator:
    """Dense square complex matrix with optional Hermitian/unitary assertions."""

    entries: np.ndarray
    hermitian: bool = False
    unitary: bool = False

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be a square matrix, got shape {m.shape}")
        object.__setattr__(self, "entries", _freeze(m))
        if self.hermitian:
            dev = np.max(np.abs(m - m.conj().T))
            if dev > HERMITIAN_ATOL:
                raise ValueError(f"hermitian flag set but max |M - M^dag| = {dev:.3e}")
        if self.unitary:
            dev = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
            if dev > UNITARY_ATOL:
                raise ValueError(f"unitary flag set but max |M^dag M - I| = {dev:.3e}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def apply(self, psi: StateVector) -> np.ndarray:
        """Raw matrix-vector product; caller handles (re)normalization."""
        if self.dim != psi.dim:
            raise ValueError(f"operator dim {self.dim} != state dim {psi.dim}")
        return self.entries @ psi.amplitudes


def identity(dim: int) -> Operator:
    return Operator(np.eye(dim, dtype=complex), hermitian=True, unitary=True)


def kron(a: Operator, b: Operator) -> Operator:
    """Kronecker product; Hermitian flag propagates when both inputs carry it."""
    return Operator(
        np.kron(a.entries, b.entries),
        hermitian=a.hermitian and b.hermitian,
        unitary=a.unitary and b.unitary,
    )


def tensor(*states: StateVector) -> StateVector:
    """Tensor product of states; factor structures concatenate."""
    amps = states[0].amplitudes
    dims: tuple[int, ...] = states[0].factor_dims
    for s in states[1:]:
        amps = np.kron(amps, s.amplitudes)
        dims = dims + s.factor_dims
    return StateVector(amps, dims)


def _embed_permutation(sites: Sequence[int], n_factors: int) -> list[int]:
    sites = list(sites)
    rest = [k for k in range(n_factors) if k not in sites]
    current = sites + rest  # axis order of kron(local, I_rest)
    perm = [0] * n_factors
    for axis_pos, factor in enumerate(current):
        perm[factor] = axis_pos
    return perm


def embed(local: Operator, sites: Sequence[int], factor_dims: Sequence[int]) -> Operator:
    """Lift `local` to the full register: acts on `sites` (in the given order,
    adjacency not required), identity on every other factor."""
    dims = [int(d) for d in factor_dims]
    n = len(dims)
    sites = [int(s) for s in sites]
    if len(set(sites)) != len(sites):
        raise ValueError(f"sites must be distinct, got {sites}")
    if any(not 0 <= s < n for s in sites):
        raise ValueError(f"site out of range for {n} factors: {sites}")
    local_dim = math.prod(dims[s] for s in sites)
    if local.dim != local_dim:
        raise ValueError(
            f"local operator dim {local.dim} != product of selected factor dims {local_dim}"
        )
    total = math.prod(dims)
    check_dim_cap(total)
    rest_dim = total // local_dim
    full = np.kron(local.entries, np.eye(rest_dim, dtype=complex))
    # Permute row/col multi-indices from [sites..., rest...] to natural order.
    perm = _embed_permutation(sites, n)
    axis_dims = [dims[s] for s in sites] + [dims[k] for k in range(n) if k not in sites]
    full = full.reshape(axis_dims + axis_dims)
    full = full.transpose(perm + [n + p for p in perm]).reshape(total, total)
    return Operator(full, hermitian=local.hermitian, unitary=local.unitary)


def apply_local(local: np.ndarray, sites: Sequence[int], psi_amps: np.ndarray,
                factor_dims: Sequence[int]) -> np.ndarray:
    """Apply a local operator to selected factors of a raw amplitude vector
    without materializing the embedded matrix. O(dim * local_dim) time."""
    dims = [int(d) for d in factor_dims]
    n = len(dims)
    sites = [int(s) for s in sites]
    site_dims = [dims[s] for s in sites]
    local_dim = math.prod(site_dims)
    local = np.asarray(local, dtype=complex).reshape(local_dim, local_dim)
    t = np.asarray(psi_amps, dtype=complex).reshape(dims)
    rest = [k for k in range(n) if k not in sites]
    t = t.transpose(sites + rest).reshape(local_dim, -1)
    t = local @ t
    t = t.reshape(site_dims + [dims[k] for k in rest])
    inv = np.argsort(sites + rest)
    return t.transpose(inv).reshape(-1)


def expm_hermitian(h: Operator, t: float) -> Operator:
    """exp(-i h t) via eigendecomposition; exact for Hermitian h."""
    if not h.hermitian:
        dev = np.max(np.abs(h.entries - h.entries.conj().T))
        if dev > HERMITIAN_ATOL:
            raise ValueError(f"expm_hermitian needs a Hermitian operator (dev {dev:.3e})")
    w, v = np.linalg.eigh(h.entries)
    u = (v * np.exp(-1j * w * t)) @ v.conj().T
    return Operator(u, unitary=True)


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def dm_fidelity(rho: Operator, psi: StateVector) -> float:
    """<psi| rho |psi> for a density matrix against a pure target."""
    if rho.dim != psi.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {psi.dim}")
    val = np.vdot(psi.amplitudes, rho.entries @ psi.amplitudes)
    return float(np.clip(val.real, 0.0, 1.0))


def partial_trace(psi: StateVector, keep: Sequence[int]) -> Operator:
    """Reduced density matrix of a pure state on the kept factors (in the
    order given). Checks unit trace and positivity."""
    keep = [int(k) for k in keep]
    n = psi.n_factors
    if len(set(keep)) != len(keep):
        raise ValueError(f"keep indices must be distinct, got {keep}")
    if any(not 0 <= k < n for k in keep):
        raise ValueError(f"keep index out of range for {n} factors: {keep}")
    dims = psi.factor_dims
    rest = [k for k in range(n) if k not in keep]
    keep_dim = math.prod(dims[k] for k in keep)
    t = psi.amplitudes.reshape(dims).transpose(keep + rest).reshape(keep_dim, -1)
    rho = t @ t.conj().T
    tr = float(rho.trace().real)
    if abs(tr - 1.0) > NORM_ATOL:
        raise ValueError(f"partial trace lost weight: trace {tr!r}")
    min_eig = float(np.linalg.eigvalsh(rho)[0])
    if min_eig < -NORM_ATOL:
        raise ValueError(f"reduced density matrix not PSD: min eigenvalue {min_eig:.3e}")
    return Operator(rho, hermitian=True)


def partial_trace_dm(rho: np.ndarray, factor_dims: Sequence[int],
                     keep: Sequence[int]) -> np.ndarray:
    """Partial trace of a raw density matrix over the factors not in `keep`."""
    dims = [int(d) for d in factor_dims]
    n = len(dims)
    keep = [int(k) for k in keep]
    rest = [k for k in range(n) if k not in keep]
    keep_dim = math.prod(dims[k] for k in keep)
    rest_dim = math.prod(dims[k] for k in rest) if rest else 1
    t = np.asarray(rho, dtype=complex).reshape(dims + dims)
    perm = keep + rest + [n + k for k in keep] + [n + k for k in rest]
    t = t.transpose(perm).reshape(keep_dim, rest_dim, keep_dim, rest_dim)
    return np.einsum("arbr->ab", t)


@dataclass(frozen=True)
class MeasurementBranch:
    """One outcome of a projective factor measurement.

    `state` is None for branches below the zero-probability floor (reporting
    renormalized noise would be meaningless).
    """

    outcome: int
    probability: float
    state: StateVector | None = field(compare=False)


def measure_factor(psi: StateVector, factor: int) -> list[MeasurementBranch]:
    """Projective measurement of one 2-dimensional tensor factor."""
    factor = int(factor)
    if not 0 <= factor < psi.n_factors:
        raise ValueError(f"factor {factor} out of range")
    if psi.factor_dims[factor] != 2:
        raise ValueError(
            f"measure_factor requires a 2-dimensional factor, "
            f"got dim {psi.factor_dims[factor]} at index {factor}"
        )
    dims = psi.factor_dims
    n = psi.n_factors
    rest = [k for k in range(n) if k != factor]
    t = psi.amplitudes.reshape(dims).transpose([factor] + rest).reshape(2, -1)
    inv = np.argsort([factor] + rest)
    branches = []
    for outcome in (0, 1):
        prob = float(np.vdot(t[outcome], t[outcome]).real)
        if prob < ZERO_PROB:
            branches.append(MeasurementBranch(outcome, prob, None))
            continue
        post = np.zeros_like(t)
        post[outcome] = t[outcome] / math.sqrt(prob)
        post_amps = post.reshape([dims[factor]] + [dims[k] for k in rest])
        post_amps = post_amps.transpose(inv).reshape(-1)
        branches.append(
            MeasurementBranch(outcome, prob, StateVector(post_amps, dims))
        )
    total = sum(b.probability for b in branches)
    if abs(total - 1.0) > NORM_ATOL:
        raise ValueError(f"branch probabilities sum to {total!r}")
    return branches


ApplyFn = Callable[[np.ndarray], np.ndarray]
