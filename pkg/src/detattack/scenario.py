"""Scenarios, ideal behaviors and the example correlations.

Tables are numpy arrays indexed ``[x, y, a, b]`` with 0-based settings and
outcomes. External formats (JSON, CLI, round logs) are 1-based; the
conversion happens at the serialization boundary only.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, UndefinedConditionalError

EXACT_TOL = 1e-12
PSD_TOL = 1e-10

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class Scenario:
    m_a: int
    m_b: int
    d: int

    def __post_init__(self):
        for name in ("m_a", "m_b", "d"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
        if self.d < 2:
            raise ConfigurationError(f"d must be at least 2, got {self.d}")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.m_a, self.m_b, self.d, self.d)

    @property
    def lossy_shape(self) -> tuple[int, int, int, int]:
        return (self.m_a, self.m_b, self.d + 1, self.d + 1)


def table_residuals(table: np.ndarray) -> dict[str, float]:
    """Worst violations of positivity, normalization and no-signalling.

    Works for any bipartite table indexed ``[x, y, a, b]``, ideal or lossy.
    """
    negativity = float(max(0.0, -table.min()))
    norm = float(np.abs(table.sum(axis=(2, 3)) - 1.0).max())
    alice = table.sum(axis=3)  # [x, y, a]
    bob = table.sum(axis=2)  # [x, y, b]
    sig_a = float(np.abs(alice - alice[:, :1, :]).max())
    sig_b = float(np.abs(bob - bob[:1, :, :]).max())
    return {
        "negativity": negativity,
        "normalization": norm,
        "signalling_to_alice": sig_a,
        "signalling_to_bob": sig_b,
    }


def _validate_table(table: np.ndarray, shape, tol: float, what: str) -> None:
    if table.shape != tuple(shape):
        raise ConfigurationError(f"{what} table has shape {table.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(table)):
        raise ConfigurationError(f"{what} table contains non-finite entries")
    bad = {k: v for k, v in table_residuals(table).items() if v > tol}
    if bad:
        raise ConfigurationError(f"{what} table violates invariants: {bad}")


@dataclass(frozen=True)
class Behavior:
    """Ideal (lossless) conditional distribution Q(ab|xy)."""

    scenario: Scenario
    table: np.ndarray = field(repr=False)
    tol: float = field(default=EXACT_TOL, repr=False, compare=False)

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        _validate_table(t, self.scenario.shape, self.tol, "behavior")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def marginal_a(self) -> np.ndarray:
        """Q(a|x) as an array ``[x, a]``."""
        return self.table[:, 0, :, :].sum(axis=2)

    def marginal_b(self) -> np.ndarray:
        """Q(b|y) as an array ``[y, b]``."""
        return self.table[0, :, :, :].sum(axis=1)

    def is_deterministic(self, tol: float = EXACT_TOL) -> bool:
        return bool(np.all((self.table < tol) | (self.table > 1 - tol)))

    def to_dict(self) -> dict:
        s = self.scenario
        return {"m_a": s.m_a, "m_b": s.m_b, "d": s.d, "table": self.table.ravel().tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Behavior":
        try:
            scenario = Scenario(int(data["m_a"]), int(data["m_b"]), int(data["d"]))
            flat = np.asarray(data["table"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed behavior record: {exc}") from exc
        if flat.size != np.prod(scenario.shape):
            raise ConfigurationError(
                f"behavior table has {flat.size} entries, expected {int(np.prod(scenario.shape))}"
            )
        return cls(scenario, flat.reshape(scenario.shape))


def single_party(q_b: np.ndarray) -> Behavior:
    """Embed Bob-only statistics Q(b|y) (array ``[y, b]``) with a trivial Alice.

    Alice has one setting and always outputs her first outcome.
    """
    q_b = np.asarray(q_b, dtype=float)
    m_b, d = q_b.shape
    table = np.zeros((1, m_b, d, d))
    table[0, :, 0, :] = q_b
    return Behavior(Scenario(1, m_b, d), table)


def conditional_bob(behavior: Behavior, x: int, a: int) -> Behavior:
    """Bob's statistics conditioned on Alice obtaining ``a`` for setting ``x``."""
    qa = behavior.marginal_a()[x, a]
    if qa <= 0:
        raise UndefinedConditionalError(f"Q(a={a}|x={x}) = 0; conditional undefined")
    cond = behavior.table[x, :, a, :] / qa
    # rows already sum to one up to rounding; renormalise so the result validates at 1e-12
    cond = cond / cond.sum(axis=1, keepdims=True)
    return single_party(cond)


# --- Born rule -------------------------------------------------------------


def _as_complex(m) -> np.ndarray:
    return np.asarray(m, dtype=complex)


@dataclass(frozen=True)
class QuantumModel:
    """Bipartite state plus one POVM per setting on each side."""

    dim_a: int
    dim_b: int
    state: np.ndarray = field(repr=False)
    povms_a: tuple = field(repr=False)
    povms_b: tuple = field(repr=False)

    def __post_init__(self):
        rho = _as_complex(self.state)
        n = self.dim_a * self.dim_b
        if rho.shape != (n, n):
            raise ConfigurationError(f"state has shape {rho.shape}, expected {(n, n)}")
        if abs(np.trace(rho) - 1) > EXACT_TOL:
            raise ConfigurationError("state trace differs from 1")
        if np.abs(rho - rho.conj().T).max() > EXACT_TOL:
            raise ConfigurationError("state is not Hermitian")
        if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
            raise ConfigurationError("state is not positive semidefinite")
        povms_a = tuple(tuple(_as_complex(e) for e in setting) for setting in self.povms_a)
        povms_b = tuple(tuple(_as_complex(e) for e in setting) for setting in self.povms_b)
        for label, povms, dim in (("a", povms_a, self.dim_a), ("b", povms_b, self.dim_b)):
            if not povms:
                raise ConfigurationError(f"no settings for party {label}")
            for k, setting in enumerate(povms):
                for e in setting:
                    if e.shape != (dim, dim):
                        raise ConfigurationError(
                            f"POVM element of party {label}, setting {k} has shape {e.shape}, "
                            f"expected {(dim, dim)}"
                        )
                    if np.abs(e - e.conj().T).max() > PSD_TOL or np.linalg.eigvalsh(e).min() < -PSD_TOL:
                        raise ConfigurationError(f"POVM element of party {label}, setting {k} is not positive")
                if np.abs(sum(setting) - np.eye(dim)).max() > PSD_TOL:
                    raise ConfigurationError(f"POVM of party {label}, setting {k} does not sum to identity")
        counts = {len(s) for s in povms_a + povms_b}
        if len(counts) != 1:
            raise ConfigurationError("all settings must have the same number of outcomes")
        object.__setattr__(self, "state", rho)
        object.__setattr__(self, "povms_a", povms_a)
        object.__setattr__(self, "povms_b", povms_b)

    @property
    def scenario(self) -> Scenario:
        return Scenario(len(self.povms_a), len(self.povms_b), len(self.povms_a[0]))

    def to_dict(self) -> dict:
        def enc(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in m]

        return {
            "dim_a": self.dim_a,
            "dim_b": self.dim_b,
            "state": enc(self.state),
            "povms_a": [[enc(e) for e in s] for s in self.povms_a],
            "povms_b": [[enc(e) for e in s] for s in self.povms_b],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QuantumModel":
        def dec(m):
            arr = np.asarray(m, dtype=float)
            if arr.ndim != 3 or arr.shape[-1] != 2:
                raise ConfigurationError("complex matrices must be arrays of [re, im] pairs")
            return arr[..., 0] + 1j * arr[..., 1]

        try:
            return cls(
                int(data["dim_a"]),
                int(data["dim_b"]),
                dec(data["state"]),
                tuple(tuple(dec(e) for e in s) for s in data["povms_a"]),
                tuple(tuple(dec(e) for e in s) for s in data["povms_b"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"malformed quantum model record: {exc}") from exc


def born_behavior(model: QuantumModel) -> Behavior:
    """Q(ab|xy) = tr[rho (A_a^x kron B_b^y)]."""
    da, db = model.dim_a, model.dim_b
    rho = model.state.reshape(da, db, da, db)
    A = np.array([list(s) for s in model.povms_a])  # [x, a, i, j]
    B = np.array([list(s) for s in model.povms_b])
    # tr[rho (A kron B)] = sum rho[i,j,k,l] A[k,i] B[l,j]
    q = np.einsum("ijkl,xaki,yblj->xyab", rho, A, B).real
    q[np.abs(q) < 1e-15] = 0.0
    return Behavior(model.scenario, q)


def mixed_model(models: Sequence[QuantumModel], weights: Sequence[float]) -> QuantumModel:
    """Same measurements, state replaced by the weighted mixture of states."""
    base = models[0]
    rho = sum(w * m.state for w, m in zip(weights, models))
    return QuantumModel(base.dim_a, base.dim_b, rho, base.povms_a, base.povms_b)


# --- Example correlations ----------------------------------------------------

_I2 = np.eye(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _projectors(observable: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(+1, -1) spectral projectors of a dichotomic observable."""
    n = observable.shape[0]
    return ((np.eye(n) + observable) / 2, (np.eye(n) - observable) / 2)


def max_entangled(dim: int) -> np.ndarray:
    psi = np.eye(dim).ravel() / np.sqrt(dim)
    return np.outer(psi, psi.conj())


CHSH_CORRELATORS = np.array([[1.0, 1.0], [1.0, -1.0]]) / SQRT2


def chsh_tsirelson() -> Behavior:
    """Quantum-maximal CHSH behavior with uniform marginals."""
    table = np.zeros((2, 2, 2, 2))
    for x, y, a, b in itertools.product(range(2), repeat=4):
        table[x, y, a, b] = (1 + (-1) ** (a + b) * CHSH_CORRELATORS[x, y]) / 4
    return Behavior(Scenario(2, 2, 2), table)


def chsh_quantum_model() -> QuantumModel:
    """|Phi+> with Z, X for Alice and (Z +- X)/sqrt2 for Bob."""
    alice = [_projectors(_Z), _projectors(_X)]
    bob = [_projectors((_Z + _X) / SQRT2), _projectors((_Z - _X) / SQRT2)]
    return QuantumModel(2, 2, max_entangled(2), alice, bob)


def chsh_value(behavior: Behavior) -> float:
    corr = correlators(behavior)
    return float(corr[0, 0] + corr[0, 1] + corr[1, 0] - corr[1, 1])


def correlators(behavior: Behavior) -> np.ndarray:
    """E(x, y) for binary outcomes, outcome index 0 mapped to +1."""
    if behavior.scenario.d != 2:
        raise ConfigurationError("correlators need binary outcomes")
    sign = np.array([[1, -1], [-1, 1]])
    return np.einsum("xyab,ab->xy", behavior.table, sign)


# Observable layout: rows multiply to +1, columns to (+1, +1, -1).
MAGIC_SQUARE = (
    (np.kron(_X, _I2), np.kron(_I2, _X), np.kron(_X, _X)),
    (np.kron(_I2, _Y), np.kron(_Y, _I2), np.kron(_Y, _Y)),
    (np.kron(_X, _Y), np.kron(_Y, _X), np.kron(_Z, _Z)),
)
COLUMN_PARITY = (1, 1, -1)


def _pm(bit: int) -> int:
    return 1 - 2 * bit


def magic_row_values(a: int) -> tuple[int, int, int]:
    """Alice's three +-1 cell values for outcome index ``a`` (0..3)."""
    v1, v2 = _pm(a >> 1), _pm(a & 1)
    return (v1, v2, v1 * v2)


def magic_column_values(b: int, y: int) -> tuple[int, int, int]:
    """Bob's three +-1 cell values for outcome index ``b`` in column ``y``."""
    w1, w2 = _pm(b >> 1), _pm(b & 1)
    return (w1, w2, COLUMN_PARITY[y] * w1 * w2)


def magic_square() -> Behavior:
    """Two-ebit Mermin-Peres square: Alice reads row x, Bob column y."""
    table = np.zeros((3, 3, 4, 4))
    for x, y, a, b in itertools.product(range(3), range(3), range(4), range(4)):
        if magic_row_values(a)[y] == magic_column_values(b, y)[x]:
            table[x, y, a, b] = 1 / 8
    return Behavior(Scenario(3, 3, 4), table)


def magic_square_model() -> QuantumModel:
    """Born-rule realisation of ``magic_square`` on two maximally entangled qubit pairs."""
    alice, bob = [], []
    for x in range(3):
        o1, o2, _ = MAGIC_SQUARE[x]
        alice.append([_joint_projector((o1, o2), magic_row_values(a)[:2]) for a in range(4)])
    for y in range(3):
        # Bob measures transposes so that <O kron O^T> = 1 on the maximally entangled state
        o1, o2 = MAGIC_SQUARE[0][y].T, MAGIC_SQUARE[1][y].T
        bob.append([_joint_projector((o1, o2), magic_column_values(b, y)[:2]) for b in range(4)])
    return QuantumModel(4, 4, max_entangled(4), alice, bob)


def _joint_projector(observables, values) -> np.ndarray:
    n = observables[0].shape[0]
    p = np.eye(n, dtype=complex)
    for o, v in zip(observables, values):
        p = p @ (np.eye(n) + v * o) / 2
    return p


# --- Random instances (property tests, acceptance sweeps) --------------------


def _haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_quantum_model(scenario: Scenario, rng: np.random.Generator) -> QuantumModel:
    """Random pure state on C^d kron C^d with random projective measurements."""
    d = scenario.d
    psi = rng.standard_normal(d * d) + 1j * rng.standard_normal(d * d)
    psi /= np.linalg.norm(psi)
    rho = np.outer(psi, psi.conj())

    def measurements(m):
        out = []
        for _ in range(m):
            u = _haar_unitary(d, rng)
            out.append([np.outer(u[:, k], u[:, k].conj()) for k in range(d)])
        return out

    return QuantumModel(d, d, rho, measurements(scenario.m_a), measurements(scenario.m_b))


def random_behavior(scenario: Scenario, rng: np.random.Generator) -> Behavior:
    return born_behavior(random_quantum_model(scenario, rng))


def deterministic_behavior(scenario: Scenario, alice: Sequence[int], bob: Sequence[int]) -> Behavior:
    """Product behavior with outcome alice[x] for setting x and bob[y] for setting y."""
    table = np.zeros(scenario.shape)
    for x, y in itertools.product(range(scenario.m_a), range(scenario.m_b)):
        table[x, y, alice[x], bob[y]] = 1.0
    return Behavior(scenario, table)


BUILTINS = {
    "chsh-tsirelson": chsh_tsirelson,
    "magic-square": magic_square,
}
