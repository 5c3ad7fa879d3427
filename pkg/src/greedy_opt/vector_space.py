"""Dense vectors in l1^(dim), dual pairings and finite symmetric dictionaries.

Points of the ambient space and linear functionals on it (gradients) are both
plain 1-D float64 numpy arrays.  A :class:`Dictionary` stores one orientation
of every atom; the engine is free to use ``-g`` as well as ``g``.
"""
from dataclasses import dataclass, field

import numpy as np


def as_point(v, dim=None):
    """Validate ``v`` as a finite 1-D float vector and return it as an array."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"dimension mismatch: {arr.shape[0]} != {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    return arr


def lp_norm(v, p):
    """Return ``(sum |v_i|^p)^(1/p)`` for ``p >= 1``."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    v = as_point(v)
    a = np.abs(v)
    if p == 1:
        return float(a.sum())
    scale = a.max(initial=0.0)
    if scale == 0.0:
        return 0.0
    # rescaling keeps |v_i|^p away from overflow/underflow for large p
    return float(scale * np.sum((a / scale) ** p) ** (1.0 / p))


def pairing(functional, v):
    """Dual pairing <functional, v> in the finite-dimensional setting."""
    functional = np.asarray(functional, dtype=float)
    v = np.asarray(v, dtype=float)
    if functional.shape != v.shape:
        raise ValueError(f"length mismatch: {functional.shape} vs {v.shape}")
    return float(np.dot(functional, v))


@dataclass(frozen=True)
class AtomChoice:
    """Selected atom ``sign * atoms[index]`` with ``score = <-E'(G), sign*g>``."""

    index: int
    sign: int
    score: float


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Finite symmetric dictionary; ``atoms`` has shape ``(natoms, dim)``.

    Every stored atom has l1 norm in ``(0, 1]``.  ``descriptor`` records how
    the dictionary was generated so that traces can rebuild it.
    """

    atoms: np.ndarray
    descriptor: dict = field(default_factory=lambda: {"kind": "explicit"})

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float)
        if atoms.ndim != 2 or atoms.shape[0] == 0 or atoms.shape[1] == 0:
            raise ValueError("dictionary needs a non-empty (natoms, dim) array")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("dictionary has non-finite entries")
        norms = np.abs(atoms).sum(axis=1)
        if np.any(norms <= 0.0) or np.any(norms > 1.0 + 1e-12):
            raise ValueError("every atom must have l1 norm in (0, 1]")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def natoms(self):
        return self.atoms.shape[0]

    @property
    def dim(self):
        return self.atoms.shape[1]

    def to_dict(self):
        d = dict(self.descriptor)
        if d.get("kind") == "explicit":
            d["atoms"] = self.atoms.tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind")
        if kind == "explicit":
            return cls(np.asarray(d["atoms"], dtype=float))
        return build_dictionary(d, d.get("seed", 0))


def build_dictionary(spec, seed=0):
    """Build a dictionary from a generator descriptor.

    ``spec`` is a mapping with ``kind`` equal to ``"random-uniform"`` (keys
    ``dim`` and ``natoms``) or ``"canonical"`` (key ``dim``).  Random atoms
    have i.i.d. U(0, 1) coordinates and are rescaled to unit l1 norm.
    """
    kind = spec.get("kind")
    dim = int(spec.get("dim", 0))
    if dim <= 0:
        raise ValueError(f"dim must be positive, got {dim}")
    if kind == "canonical":
        return Dictionary(np.eye(dim), {"kind": "canonical", "dim": dim})
    if kind == "random-uniform":
        natoms = int(spec.get("natoms", 0))
        if natoms <= 0:
            raise ValueError(f"natoms must be positive, got {natoms}")
        rng = np.random.default_rng(seed)
        atoms = rng.uniform(0.0, 1.0, size=(natoms, dim))
        atoms /= atoms.sum(axis=1, keepdims=True)
        return Dictionary(atoms, {"kind": "random-uniform", "dim": dim,
                                  "natoms": natoms, "seed": int(seed)})
    raise ValueError(f"unknown dictionary kind {kind!r}")


def best_atom(neg_gradient, dictionary, t=1.0):
    """Greedy selection over the symmetric dictionary.

    Always returns the exact maximizer of ``|<neg_gradient, g_j>|`` (lowest
    index on ties), oriented so that the pairing is nonnegative.  Any ``t`` in
    ``(0, 1]`` is therefore satisfied; ``t`` is only validated here.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"weakness t must lie in [0, 1], got {t}")
    neg_gradient = as_point(neg_gradient, dictionary.dim)
    s = dictionary.atoms @ neg_gradient
    idx = int(np.argmax(np.abs(s)))
    sign = 1 if s[idx] >= 0 else -1
    return AtomChoice(idx, sign, float(abs(s[idx])))
