"""Plant, measurement channels, DoS selection masks and switching FIR operators.

An attacker drops measurement channels; each drop pattern defines a mode
whose stacked output matrices are the nominal ones with the undelivered
rows zeroed.  Admissible attack sequences are paths of a transition
automaton, and estimator building blocks are FIR operators whose taps are
selected by the trailing window of the mode sequence.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .operator_core import TruncatedOperator, make_diagonal

__all__ = [
    "ChannelPlant",
    "SelectionMask",
    "SwitchedOutputModel",
    "SwitchingAutomaton",
    "ModeHistory",
    "SwitchingFIR",
    "build_modes",
    "enumerate_histories",
    "history_at",
    "instantiate",
    "lift_outputs",
    "broadcast_taps",
]


def _mat(m, name: str) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-d matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class ChannelPlant:
    """Linear plant with per-channel measurements.

    x(t+1) = A x(t) + B w(t); channel i measures C_i x(t) + D_i w(t).
    x0_bound is the peak-norm budget assumed for the initial condition.
    """

    A: np.ndarray
    B: np.ndarray
    channels: tuple
    x0_bound: float = 1.0

    def __post_init__(self):
        A = _mat(self.A, "A")
        B = _mat(self.B, "B")
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if not self.channels:
            raise ValueError("at least one measurement channel is required")
        chans = []
        for idx, (C_i, D_i) in enumerate(self.channels, start=1):
            C_i = _mat(C_i, f"C_{idx}")
            D_i = _mat(D_i, f"D_{idx}")
            if C_i.shape[1] != n:
                raise ValueError(f"C_{idx} has {C_i.shape[1]} columns, expected {n}")
            if D_i.shape != (C_i.shape[0], B.shape[1]):
                raise ValueError(
                    f"D_{idx} has shape {D_i.shape}, expected {(C_i.shape[0], B.shape[1])}")
            chans.append((C_i, D_i))
        if self.x0_bound < 0:
            raise ValueError("x0_bound must be nonnegative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "channels", tuple(chans))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m_w(self) -> int:
        return self.B.shape[1]

    @property
    def channel_count(self) -> int:
        return len(self.channels)

    @property
    def channel_dims(self) -> tuple[int, ...]:
        return tuple(C.shape[0] for C, _ in self.channels)

    @property
    def p(self) -> int:
        return sum(self.channel_dims)

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """Nominal stacked output matrices (all channels delivered)."""
        C = np.vstack([C_i for C_i, _ in self.channels])
        D = np.vstack([D_i for _, D_i in self.channels])
        return C, D


@dataclass(frozen=True)
class SelectionMask:
    """Set of delivered channel numbers (1-based, matching y_1 .. y_N)."""

    delivered: frozenset

    def __init__(self, delivered):
        object.__setattr__(self, "delivered", frozenset(int(i) for i in delivered))

    def validate(self, channel_count: int) -> None:
        for i in self.delivered:
            if not (1 <= i <= channel_count):
                raise ValueError(f"channel {i} outside 1..{channel_count}")

    @staticmethod
    def full(channel_count: int) -> "SelectionMask":
        return SelectionMask(range(1, channel_count + 1))


@dataclass(frozen=True)
class SwitchedOutputModel:
    """Per-mode stacked output matrices; mode 0 is the nominal (full) one."""

    modes: tuple

    def __post_init__(self):
        if not self.modes:
            raise ValueError("at least one mode is required")
        shape_c = self.modes[0][0].shape
        shape_d = self.modes[0][1].shape
        clean = []
        for j, (C_j, D_j) in enumerate(self.modes):
            C_j = _mat(C_j, f"C^{j}")
            D_j = _mat(D_j, f"D^{j}")
            if C_j.shape != shape_c or D_j.shape != shape_d:
                raise ValueError(f"mode {j} matrices do not match mode 0 shapes")
            clean.append((C_j, D_j))
        object.__setattr__(self, "modes", tuple(clean))

    @property
    def mode_count(self) -> int:
        return len(self.modes)

    @property
    def p(self) -> int:
        return self.modes[0][0].shape[0]

    @property
    def n(self) -> int:
        return self.modes[0][0].shape[1]

    @property
    def m_w(self) -> int:
        return self.modes[0][1].shape[1]

    def C(self, mode: int) -> np.ndarray:
        return self.modes[mode][0]

    def D(self, mode: int) -> np.ndarray:
        return self.modes[mode][1]


def build_modes(plant: ChannelPlant, patterns) -> SwitchedOutputModel:
    """Stack the channel matrices and zero the rows each pattern drops.

    patterns[0] must deliver every channel (the nominal mode).
    """
    patterns = [p if isinstance(p, SelectionMask) else SelectionMask(p) for p in patterns]
    if not patterns:
        raise ValueError("at least one selection pattern is required")
    N = plant.channel_count
    for pat in patterns:
        pat.validate(N)
    if patterns[0].delivered != frozenset(range(1, N + 1)):
        raise ValueError("pattern 0 must deliver all channels (nominal mode)")
    seen = set()
    for j, pat in enumerate(patterns):
        if pat.delivered in seen:
            warnings.warn(f"selection pattern {j} duplicates an earlier mode")
        seen.add(pat.delivered)
    C0, D0 = plant.stacked()
    dims = plant.channel_dims
    offsets = np.concatenate(([0], np.cumsum(dims)))
    modes = []
    for pat in patterns:
        keep = np.zeros(plant.p)
        for i in pat.delivered:
            keep[offsets[i - 1]:offsets[i]] = 1.0
        modes.append((keep[:, None] * C0, keep[:, None] * D0))
    return SwitchedOutputModel(tuple(modes))


@dataclass(frozen=True)
class SwitchingAutomaton:
    """Transition structure of admissible mode sequences.

    allowed[a, b] permits a step from mode a to mode b; initial is the set
    of modes a sequence may start in; padding_mode is the mode assumed for
    virtual times before the sequence begins.
    """

    mode_count: int
    allowed: np.ndarray
    initial: frozenset
    padding_mode: int = 0

    def __init__(self, mode_count: int, allowed=None, initial=None, padding_mode: int = 0):
        if mode_count < 1:
            raise ValueError("mode_count must be positive")
        if allowed is None:
            allowed_arr = np.ones((mode_count, mode_count), dtype=bool)
        else:
            allowed_arr = np.asarray(allowed, dtype=bool)
            if allowed_arr.shape != (mode_count, mode_count):
                raise ValueError(f"allowed must be {mode_count}x{mode_count}")
        allowed_arr = allowed_arr.copy()
        allowed_arr.flags.writeable = False
        init = frozenset(range(mode_count)) if initial is None else frozenset(int(i) for i in initial)
        for i in init:
            if not (0 <= i < mode_count):
                raise ValueError(f"initial mode {i} out of range")
        if not (0 <= padding_mode < mode_count):
            raise ValueError("padding_mode out of range")
        object.__setattr__(self, "mode_count", mode_count)
        object.__setattr__(self, "allowed", allowed_arr)
        object.__setattr__(self, "initial", init)
        object.__setattr__(self, "padding_mode", int(padding_mode))

    @staticmethod
    def complete(mode_count: int, padding_mode: int = 0) -> "SwitchingAutomaton":
        return SwitchingAutomaton(mode_count, padding_mode=padding_mode)

    def is_admissible(self, sigma) -> bool:
        sigma = list(sigma)
        if not sigma:
            return True
        if sigma[0] not in self.initial:
            return False
        return all(self.allowed[a, b] for a, b in zip(sigma, sigma[1:]))

    def admissible_sequences(self, length: int):
        """Yield every admissible mode sequence of the given length."""
        def extend(prefix):
            if len(prefix) == length:
                yield tuple(prefix)
                return
            if not prefix:
                choices = sorted(self.initial)
            else:
                choices = [b for b in range(self.mode_count) if self.allowed[prefix[-1], b]]
            for b in choices:
                prefix.append(b)
                yield from extend(prefix)
                prefix.pop()
        yield from extend([])

    def random_sequence(self, length: int, rng: np.random.Generator) -> tuple[int, ...]:
        seq = []
        for t in range(length):
            if t == 0:
                choices = sorted(self.initial)
            else:
                choices = [b for b in range(self.mode_count) if self.allowed[seq[-1], b]]
            if not choices:
                raise ValueError(f"automaton dead-ends after prefix {tuple(seq)}")
            seq.append(int(choices[rng.integers(len(choices))]))
        return tuple(seq)


@dataclass(frozen=True)
class ModeHistory:
    """Trailing window of a mode sequence, most recent mode last."""

    modes: tuple

    def __init__(self, modes):
        object.__setattr__(self, "modes", tuple(int(m) for m in modes))

    def __len__(self):
        return len(self.modes)

    def suffix(self, length: int) -> tuple[int, ...]:
        return self.modes[len(self.modes) - length:]


def enumerate_histories(automaton: SwitchingAutomaton, length: int) -> list[ModeHistory]:
    """All length-`length` windows a sliding observer of admissible sequences can see.

    Interior windows are paths of the transition graph.  Startup windows
    (times before a full window of real modes exists) are padding-mode
    prefixes followed by an admissible path starting in `initial`; the
    virtual padding-to-start junction is exempt from the transition check.
    Deduplicated, lexicographically sorted.
    """
    if length < 1:
        raise ValueError("history length must be >= 1")
    allowed = automaton.allowed
    found: set[tuple[int, ...]] = set()

    def paths(first_choices, remaining):
        for first in first_choices:
            stack = [(first,)]
            while stack:
                pref = stack.pop()
                if len(pref) == remaining:
                    yield pref
                    continue
                for b in range(automaton.mode_count):
                    if allowed[pref[-1], b]:
                        stack.append(pref + (b,))

    # interior windows: any path
    for path in paths(range(automaton.mode_count), length):
        found.add(path)
    # startup windows: padding prefix + admissible start
    pad = automaton.padding_mode
    for j in range(1, length):
        for path in paths(sorted(automaton.initial), length - j):
            found.add((pad,) * j + path)
    return [ModeHistory(h) for h in sorted(found)]


def history_at(sigma, t: int, length: int, padding_mode: int = 0) -> tuple[int, ...]:
    """Window (sigma(t-length+1), ..., sigma(t)) with padding before time 0."""
    out = []
    for s in range(t - length + 1, t + 1):
        out.append(int(sigma[s]) if s >= 0 else padding_mode)
    return tuple(out)


@dataclass(frozen=True)
class SwitchingFIR:
    """FIR operator whose taps are selected by the trailing mode window.

    coeffs maps (history tuple of length `memory`, lag in 0..fir_length-1)
    to an (out_dim, in_dim) matrix.  output_only marks operators intended
    as output-only switching systems (taps read the mode window only).
    """

    memory: int
    fir_length: int
    in_dim: int
    out_dim: int
    coeffs: dict
    output_only: bool = False

    def __post_init__(self):
        if self.memory < 1 or self.fir_length < 1:
            raise ValueError("memory and fir_length must be >= 1")
        clean = {}
        for (hist, k), mat in self.coeffs.items():
            hist = tuple(int(m) for m in hist)
            if len(hist) != self.memory:
                raise ValueError(f"history {hist} has length {len(hist)}, expected {self.memory}")
            if not (0 <= k < self.fir_length):
                raise ValueError(f"lag {k} outside 0..{self.fir_length - 1}")
            mat = _mat(mat, f"coeff{(hist, k)}")
            if mat.shape != (self.out_dim, self.in_dim):
                raise ValueError(
                    f"coeff {(hist, k)} has shape {mat.shape}, expected {(self.out_dim, self.in_dim)}")
            mat = mat.copy()
            mat.flags.writeable = False
            clean[(hist, int(k))] = mat
        object.__setattr__(self, "coeffs", clean)

    def tap(self, history, lag: int) -> np.ndarray:
        key = (tuple(history), lag)
        mat = self.coeffs.get(key)
        if mat is None:
            raise KeyError(
                f"no coefficient for history {tuple(history)} at lag {lag}; "
                "the admissible-switching set and the stored taps disagree")
        return mat

    def histories(self) -> list[tuple[int, ...]]:
        return sorted({h for h, _ in self.coeffs})

    def negate(self) -> "SwitchingFIR":
        return SwitchingFIR(self.memory, self.fir_length, self.in_dim, self.out_dim,
                            {key: -mat for key, mat in self.coeffs.items()},
                            output_only=self.output_only)


def instantiate(fir: SwitchingFIR, sigma, horizon: int,
                padding_mode: int = 0) -> TruncatedOperator:
    """Freeze the switching FIR along a mode sequence into a kernel operator."""
    sigma = tuple(sigma)
    if len(sigma) < horizon:
        raise ValueError(f"sigma has {len(sigma)} entries, horizon is {horizon}")
    kernel = {}
    for t in range(horizon):
        hist = history_at(sigma, t, fir.memory, padding_mode)
        for k in range(min(t, fir.fir_length - 1) + 1):
            kernel[(t, k)] = fir.tap(hist, k)
    return TruncatedOperator(horizon, fir.in_dim, fir.out_dim, kernel)


def lift_outputs(model: SwitchedOutputModel, sigma, horizon: int
                 ) -> tuple[TruncatedOperator, TruncatedOperator]:
    """Diagonal operators with blocks C^{sigma(t)}, D^{sigma(t)}."""
    sigma = tuple(sigma)
    if len(sigma) < horizon:
        raise ValueError(f"sigma has {len(sigma)} entries, horizon is {horizon}")
    for t in range(horizon):
        if not (0 <= sigma[t] < model.mode_count):
            raise ValueError(f"mode {sigma[t]} at time {t} out of range")
    Cbar = make_diagonal([model.C(sigma[t]) for t in range(horizon)], horizon)
    Dbar = make_diagonal([model.D(sigma[t]) for t in range(horizon)], horizon)
    return Cbar, Dbar


def broadcast_taps(fir: SwitchingFIR, automaton: SwitchingAutomaton,
                   source_history=None) -> SwitchingFIR:
    """Copy one history's taps to every admissible history.

    Used to apply a single-mode design blindly under switching, e.g. a
    nominal estimator that ignores the attack pattern.
    """
    source = (tuple(source_history) if source_history is not None
              else (automaton.padding_mode,) * fir.memory)
    hists = enumerate_histories(automaton, fir.memory)
    coeffs = {}
    for hist in hists:
        for k in range(fir.fir_length):
            coeffs[(hist.modes, k)] = fir.tap(source, k)
    return SwitchingFIR(fir.memory, fir.fir_length, fir.in_dim, fir.out_dim,
                        coeffs, output_only=fir.output_only)
