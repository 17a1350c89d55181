"""Gate definitions, circuits, Euler synthesis and connectivity routing.

Conventions
-----------
* Qubit 0 is the least-significant bit of a basis-state index.
* A gate's ``qubits`` tuple lists controls first. Its local matrix treats the
  first listed qubit as the most-significant bit, so ``CNOT`` has the usual
  textbook matrix with ``qubits = (control, target)``.
* ``Rz(phi) = diag(exp(-i phi/2), exp(i phi/2))``; this differs from some
  toolkits by a global phase. ``Phase-E(d) = diag(1, exp(i d))``.
"""
from __future__ import annotations

import heapq
import itertools
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "GateError",
    "PlacedGate",
    "Circuit",
    "EulerZYZ",
    "GATE_ARITY",
    "GATE_NPARAMS",
    "VIGO_T",
    "gate_matrix",
    "rx",
    "ry",
    "rz",
    "phase_e",
    "u2_matrix",
    "euler_zyz",
    "controlled_u2_circuit",
    "controlled_u2_gates",
    "route_to_connectivity",
    "route_optimal",
    "gates_commute",
    "replay_routing",
    "RoutingSchedule",
    "cnot_count",
    "expand_gates",
    "circuit_to_text",
    "circuit_from_text",
]

ATOL = 1e-10


class GateError(ValueError):
    """Invalid gate, circuit or synthesis input."""


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)
TOFFOLI = np.eye(8, dtype=complex)
TOFFOLI[6:, 6:] = X


def rx(phi: float) -> np.ndarray:
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(phi: float) -> np.ndarray:
    c, s = math.cos(phi / 2), math.sin(phi / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(phi: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * phi), 0], [0, np.exp(0.5j * phi)]], dtype=complex
    )


def phase_e(delta: float) -> np.ndarray:
    return np.array([[1, 0], [0, np.exp(1j * delta)]], dtype=complex)


def u2_matrix(delta: float, x1: float, x2: float, x3: float) -> np.ndarray:
    """``exp(-i delta) Rz(x1) Ry(x2) Rz(x3)``."""
    return np.exp(-1j * delta) * (rz(x1) @ ry(x2) @ rz(x3))


GATE_ARITY = {
    "X": 1, "Y": 1, "Z": 1, "H": 1, "Rx": 1, "Ry": 1, "Rz": 1,
    "Phase-E": 1, "U2": 1, "CNOT": 2, "SWAP": 2, "ControlledU2": 2,
    "Toffoli": 3,
}
GATE_NPARAMS = {
    "X": 0, "Y": 0, "Z": 0, "H": 0, "Rx": 1, "Ry": 1, "Rz": 1,
    "Phase-E": 1, "U2": 4, "CNOT": 0, "SWAP": 0, "ControlledU2": 4,
    "Toffoli": 0,
}
_FIXED = {"X": X, "Y": Y, "Z": Z, "H": H, "CNOT": CNOT, "SWAP": SWAP,
          "Toffoli": TOFFOLI}


def gate_matrix(kind: str, params: Sequence[float] = ()) -> np.ndarray:
    """Local unitary of a gate kind (first listed qubit = most significant)."""
    if kind in _FIXED:
        return _FIXED[kind]
    if kind == "Rx":
        return rx(params[0])
    if kind == "Ry":
        return ry(params[0])
    if kind == "Rz":
        return rz(params[0])
    if kind == "Phase-E":
        return phase_e(params[0])
    if kind == "U2":
        return u2_matrix(*params)
    if kind == "ControlledU2":
        m = np.eye(4, dtype=complex)
        m[2:, 2:] = u2_matrix(*params)
        return m
    raise GateError(f"unknown gate kind {kind!r}")


# ---------------------------------------------------------------------------
# circuit values
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlacedGate:
    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in GATE_ARITY:
            raise GateError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.qubits) != GATE_ARITY[self.kind]:
            raise GateError(
                f"{self.kind} acts on {GATE_ARITY[self.kind]} qubit(s), "
                f"got {self.qubits}"
            )
        if len(self.params) != GATE_NPARAMS[self.kind]:
            raise GateError(
                f"{self.kind} takes {GATE_NPARAMS[self.kind]} parameter(s), "
                f"got {len(self.params)}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise GateError(f"duplicate qubit in {self.kind} {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise GateError(f"negative qubit index in {self.qubits}")

    @property
    def matrix(self) -> np.ndarray:
        return gate_matrix(self.kind, self.params)

    def relabel(self, mapping) -> "PlacedGate":
        return PlacedGate(self.kind, tuple(mapping[q] for q in self.qubits),
                          self.params)

    def inverse(self) -> "PlacedGate":
        k, p = self.kind, self.params
        if k in ("Rx", "Ry", "Rz", "Phase-E"):
            return PlacedGate(k, self.qubits, (-p[0],))
        if k in ("U2", "ControlledU2"):
            d, x1, x2, x3 = p
            return PlacedGate(k, self.qubits, (-d, -x3, -x2, -x1))
        return self


def _edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over ``n_qubits`` physical qubits.

    ``initial_layout[i]`` / ``final_layout[i]`` give the physical qubit that
    holds logical qubit ``i`` before / after the circuit. ``None`` means the
    identity layout over all qubits.
    """

    n_qubits: int
    gates: tuple[PlacedGate, ...] = ()
    connectivity: frozenset | None = None
    initial_layout: tuple[int, ...] | None = None
    final_layout: tuple[int, ...] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise GateError("circuit needs at least one qubit")
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.connectivity is not None:
            object.__setattr__(
                self, "connectivity",
                frozenset(_edge(a, b) for a, b in self.connectivity),
            )
        for g in self.gates:
            if max(g.qubits) >= self.n_qubits:
                raise GateError(
                    f"{g.kind} on {g.qubits} exceeds {self.n_qubits} qubits"
                )
            if self.connectivity is not None and len(g.qubits) > 1:
                for a, b in _gate_pairs(g):
                    if _edge(a, b) not in self.connectivity:
                        raise GateError(
                            f"{g.kind} on {g.qubits} violates connectivity"
                        )
        for lay in (self.initial_layout, self.final_layout):
            if lay is not None:
                if len(set(lay)) != len(lay) or max(lay) >= self.n_qubits:
                    raise GateError(f"invalid layout {lay}")

    @property
    def n_logical(self) -> int:
        lay = self.initial_layout
        return self.n_qubits if lay is None else len(lay)

    def layout_in(self) -> tuple[int, ...]:
        return self.initial_layout or tuple(range(self.n_qubits))

    def layout_out(self) -> tuple[int, ...]:
        return self.final_layout or self.layout_in()

    def __len__(self) -> int:
        return len(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise GateError("cannot concatenate circuits of different width")
        return Circuit(self.n_qubits, self.gates + other.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits,
                       tuple(g.inverse() for g in reversed(self.gates)))

    def with_gates(self, gates: Iterable[PlacedGate]) -> "Circuit":
        return replace(self, gates=tuple(gates))


def _gate_pairs(g: PlacedGate) -> list[tuple[int, int]]:
    """Qubit pairs that must be adjacent for a multi-qubit gate."""
    if len(g.qubits) == 2:
        return [g.qubits]
    # Toffoli: each control must touch the target
    t = g.qubits[-1]
    return [(c, t) for c in g.qubits[:-1]]


# Five-qubit T-shaped device graph.
VIGO_T = frozenset({(0, 1), (1, 2), (1, 3), (3, 4)})


# ---------------------------------------------------------------------------
# Euler decomposition and controlled-U synthesis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EulerZYZ:
    """``U = exp(-i delta) Rz(x1) Ry(x2) Rz(x3)``."""

    delta: float
    x1: float
    x2: float
    x3: float

    def matrix(self) -> np.ndarray:
        return u2_matrix(self.delta, self.x1, self.x2, self.x3)


def _check_unitary(u: np.ndarray, dim: int) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (dim, dim):
        raise GateError(f"expected a {dim}x{dim} matrix, got {u.shape}")
    if np.max(np.abs(u.conj().T @ u - np.eye(dim))) > ATOL:
        raise GateError("matrix is not unitary")
    return u


def euler_zyz(u: np.ndarray) -> EulerZYZ:
    """ZYZ Euler angles with gauge ``x3 = 0`` when ``x2`` is 0 or pi."""
    u = _check_unitary(u, 2)
    delta = -0.5 * np.angle(np.linalg.det(u))
    v = np.exp(1j * delta) * u  # in SU(2)
    x2 = 2.0 * math.atan2(abs(v[1, 0]), abs(v[0, 0]))
    if abs(v[1, 0]) < 1e-12:
        x1, x3 = -2.0 * np.angle(v[0, 0]), 0.0
        x2 = 0.0
    elif abs(v[0, 0]) < 1e-12:
        x1, x3 = 2.0 * np.angle(v[1, 0]), 0.0
        x2 = math.pi
    else:
        s = -2.0 * np.angle(v[0, 0])  # x1 + x3
        d = 2.0 * np.angle(v[1, 0])   # x1 - x3
        x1, x3 = 0.5 * (s + d), 0.5 * (s - d)
    e = EulerZYZ(float(delta), float(x1), float(x2), float(x3))
    # Fold a possible sign into the phase so reconstruction is exact.
    if np.max(np.abs(e.matrix() - u)) > 1e-9:
        e = EulerZYZ(float(delta + math.pi), e.x1, e.x2, e.x3)
    return e


def controlled_u2_gates(u: np.ndarray, control: int, target: int,
                        anti: bool = False) -> list[PlacedGate]:
    """Two-CNOT controlled-U gate list (``anti`` fires on control ``|0>``)."""
    e = euler_zyz(u)
    x1, x2, x3 = e.x1, e.x2, e.x3
    gates: list[PlacedGate] = []
    if anti:
        gates.append(PlacedGate("X", (control,)))
    # A, CNOT, B, CNOT, C on the target; E on the control carries the phase.
    gates += [
        PlacedGate("Rz", (target,), ((x3 - x1) / 2,)),
        PlacedGate("CNOT", (control, target)),
        PlacedGate("Rz", (target,), (-(x1 + x3) / 2,)),
        PlacedGate("Ry", (target,), (-x2 / 2,)),
        PlacedGate("CNOT", (control, target)),
        PlacedGate("Ry", (target,), (x2 / 2,)),
        PlacedGate("Rz", (target,), (x1,)),
        PlacedGate("Phase-E", (control,), (-e.delta,)),
    ]
    if anti:
        gates.append(PlacedGate("X", (control,)))
    return gates


def controlled_u2_circuit(u: np.ndarray, control: int = 0,
                          target: int = 1) -> Circuit:
    """Circuit for ``|0><0| (x) 1 + |1><1| (x) U`` using exactly two CNOTs."""
    n = max(control, target) + 1
    return Circuit(n, controlled_u2_gates(u, control, target))


# ---------------------------------------------------------------------------
# gate counting and expansion
# ---------------------------------------------------------------------------

_EXPANDED_COST = {"CNOT": 1, "SWAP": 3, "Toffoli": 6, "ControlledU2": 2}


def cnot_count(circuit: Circuit, expand: bool = True) -> int:
    """Number of CNOTs; with ``expand`` composite gates count their CNOTs."""
    if not expand:
        return sum(1 for g in circuit.gates if g.kind == "CNOT")
    return sum(_EXPANDED_COST.get(g.kind, 0) for g in circuit.gates)


def _toffoli_gates(a: int, b: int, t: int) -> list[PlacedGate]:
    # standard six-CNOT decomposition; T = Rz(pi/4) up to phase
    def tg(q, s=1):
        return PlacedGate("Phase-E", (q,), (s * math.pi / 4,))

    return [
        PlacedGate("H", (t,)),
        PlacedGate("CNOT", (b, t)), tg(t, -1),
        PlacedGate("CNOT", (a, t)), tg(t),
        PlacedGate("CNOT", (b, t)), tg(t, -1),
        PlacedGate("CNOT", (a, t)), tg(b), tg(t),
        PlacedGate("H", (t,)),
        PlacedGate("CNOT", (a, b)), tg(a), tg(b, -1),
        PlacedGate("CNOT", (a, b)),
    ]


def expand_gates(circuit: Circuit) -> Circuit:
    """Rewrite SWAP, Toffoli and ControlledU2 into CNOTs and 1-qubit gates."""
    out: list[PlacedGate] = []
    for g in circuit.gates:
        if g.kind == "SWAP":
            a, b = g.qubits
            out += [PlacedGate("CNOT", (a, b)), PlacedGate("CNOT", (b, a)),
                    PlacedGate("CNOT", (a, b))]
        elif g.kind == "Toffoli":
            out += _toffoli_gates(*g.qubits)
        elif g.kind == "ControlledU2":
            out += controlled_u2_gates(u2_matrix(*g.params), *g.qubits)
        else:
            out.append(g)
    return replace(circuit, gates=tuple(out))


# ---------------------------------------------------------------------------
# routing
# ---------------------------------------------------------------------------


def _adjacency(edges: Iterable[tuple[int, int]], n: int) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in range(n)]
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    return adj


def _shortest_path(adj: list[set[int]], src: int, dst: int) -> list[int]:
    prev = {src: None}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if u == dst:
            break
        for v in sorted(adj[u]):
            if v not in prev:
                prev[v] = u
                queue.append(v)
    path = [dst]
    while path[-1] != src:
        path.append(prev[path[-1]])
    return path[::-1]


def _emit_swap(out: list[PlacedGate], p: int, q: int) -> int:
    """Append a SWAP on physical (p, q); return the number of CNOTs added.

    When the most recent two-qubit interaction on p or q is a CNOT on the same
    pair (with only single-qubit gates on p/q in between), CNOT followed by
    SWAP is rewritten as two CNOTs.
    """
    moved: list[int] = []
    j = len(out) - 1
    while j >= 0:
        g = out[j]
        if not set(g.qubits) & {p, q}:
            j -= 1
            continue
        if len(g.qubits) == 1:
            moved.append(j)
            j -= 1
            continue
        break
    swap_map = {p: q, q: p}
    if j >= 0 and out[j].kind == "CNOT" and set(out[j].qubits) == {p, q}:
        a, b = out[j].qubits
        carried = [out[i].relabel(swap_map) for i in reversed(moved)]
        for i in sorted(moved + [j], reverse=True):
            del out[i]
        out.append(PlacedGate("CNOT", (b, a)))
        out.append(PlacedGate("CNOT", (a, b)))
        out += carried
        return 1
    out += [PlacedGate("CNOT", (p, q)), PlacedGate("CNOT", (q, p)),
            PlacedGate("CNOT", (p, q))]
    return 3


def route_to_connectivity(
    circuit: Circuit,
    connectivity: Iterable[tuple[int, int]] = VIGO_T,
    initial_layout: Sequence[int] | None = None,
    n_physical: int | None = None,
) -> Circuit:
    """Greedy shortest-path SWAP insertion.

    Logical qubit ``i`` starts on physical ``initial_layout[i]``. Before each
    multi-qubit gate whose operands are not adjacent, the first operand is
    swapped along a shortest path toward the last one. SWAPs are emitted as
    CNOTs, merging with an adjacent CNOT on the same pair when possible. The
    returned circuit records ``initial_layout`` and ``final_layout`` and
    ``meta['added_cnots']``.
    """
    edges = frozenset(_edge(a, b) for a, b in connectivity)
    nodes = {q for e in edges for q in e}
    n_phys = n_physical or (max(nodes) + 1 if nodes else circuit.n_qubits)
    n_log = circuit.n_qubits
    if initial_layout is None:
        initial_layout = tuple(range(n_log))
    layout = list(initial_layout)
    if len(layout) != n_log or len(set(layout)) != n_log:
        raise GateError("initial layout must place every logical qubit once")
    if n_phys < n_log or max(layout) >= n_phys:
        raise GateError("device too small for circuit")
    adj = _adjacency(edges, n_phys)
    # connectedness over the physical qubits in use
    seen = {layout[0]}
    stack = [layout[0]]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    if not set(range(n_phys)) <= seen:
        raise GateError("connectivity graph is disconnected")

    out: list[PlacedGate] = []
    added = 0
    swaps = 0
    for g in circuit.gates:
        if len(g.qubits) > 1:
            for a_log, b_log in _gate_pairs(g):
                pa, pb = layout[a_log], layout[b_log]
                if _edge(pa, pb) in edges:
                    continue
                path = _shortest_path(adj, pa, pb)
                for step in path[1:-1]:
                    cur = layout[a_log]
                    added += _emit_swap(out, cur, step)
                    swaps += 1
                    # update layout: whoever sits on step moves to cur
                    for i, ph in enumerate(layout):
                        if ph == step:
                            layout[i] = cur
                    layout[a_log] = step
        out.append(g.relabel(layout))
    meta = {"added_cnots": added, "swaps": swaps}
    return Circuit(n_phys, tuple(out), edges, tuple(initial_layout),
                   tuple(layout), meta)


def _open_after(open_edges: frozenset, pa: int, pb: int, is_cnot: bool
                ) -> frozenset:
    """Edges whose latest two-qubit interaction is a CNOT on that edge."""
    keep = frozenset(e for e in open_edges if pa not in e and pb not in e)
    return keep | {_edge(pa, pb)} if is_cnot else keep


def _local_matrix(g: PlacedGate, order: Sequence[int]) -> np.ndarray:
    """Matrix of ``g`` on the qubits ``order`` (first = most significant)."""
    rest = [q for q in order if q not in g.qubits]
    k = len(order)
    full = np.kron(g.matrix, np.eye(2 ** len(rest)))
    src_order = list(g.qubits) + rest
    perm = [src_order.index(q) for q in order]
    t = full.reshape((2,) * (2 * k))
    t = t.transpose(perm + [k + p for p in perm])
    return t.reshape(2**k, 2**k)


def gates_commute(g: PlacedGate, h: PlacedGate, tol: float = 1e-12) -> bool:
    if not set(g.qubits) & set(h.qubits):
        return True
    order = sorted(set(g.qubits) | set(h.qubits))
    a, b = _local_matrix(g, order), _local_matrix(h, order)
    return bool(np.abs(a @ b - b @ a).max() < tol)


@dataclass(frozen=True)
class RoutingSchedule:
    """Result of :func:`route_optimal` that can be replayed on a circuit
    with the same gate structure but different rotation angles."""

    initial_layout: tuple[int, ...]
    actions: tuple[tuple, ...]  # ("gate", k) or ("swap", p, q)
    pred: tuple[int, ...]  # transitive predecessor bitmasks
    connectivity: frozenset
    n_physical: int


def _dependency_masks(gates: Sequence[PlacedGate], reorder: bool) -> list[int]:
    pred = [0] * len(gates)
    for j in range(len(gates)):
        for i in range(j):
            if not reorder or not gates_commute(gates[i], gates[j]):
                pred[j] |= (1 << i) | pred[i]
    return pred


def route_optimal(
    circuit: Circuit,
    connectivity: Iterable[tuple[int, int]] = VIGO_T,
    initial_layouts: Iterable[Sequence[int]] | None = None,
    n_physical: int | None = None,
    reorder: bool = False,
) -> Circuit:
    """Minimum-CNOT SWAP insertion by Dijkstra search.

    Searches over the given initial layouts (all placements when ``None``)
    and over every SWAP sequence between two-qubit gates. A SWAP directly
    after a CNOT on the same pair costs one extra CNOT, otherwise three.
    With ``reorder`` the two-qubit gates may also run in any order allowed
    by exact pairwise commutation. Intended for small circuits. The schedule
    is stored in ``meta['schedule']`` for :func:`replay_routing`.
    """
    edges = frozenset(_edge(a, b) for a, b in connectivity)
    nodes = {q for e in edges for q in e}
    n_phys = n_physical or max(nodes) + 1
    n_log = circuit.n_qubits
    if n_phys < n_log:
        raise GateError("device too small for circuit")
    gates = circuit.gates
    for g in gates:
        if len(g.qubits) > 2:
            raise GateError("expand gates with more than two qubits first")
    if initial_layouts is None:
        initial_layouts = itertools.permutations(range(n_phys), n_log)
    pred = _dependency_masks(gates, reorder)
    two = [k for k, g in enumerate(gates) if len(g.qubits) == 2]
    two_mask = sum(1 << k for k in two)
    cost_of = {k: cnot_count(Circuit(n_log, (gates[k],))) for k in two}

    start_states = []
    for lay in initial_layouts:
        lay = tuple(lay)
        if len(lay) != n_log or len(set(lay)) != n_log or max(lay) >= n_phys:
            raise GateError("invalid initial layout")
        start_states.append((0, lay, frozenset()))
    if not start_states:
        raise GateError("no initial layout given")
    dist = {s: 0 for s in start_states}
    parent: dict = {s: None for s in start_states}
    heap = [(0, k, s) for k, s in enumerate(start_states)]
    heapq.heapify(heap)
    tie = len(heap)
    goal = None
    while heap:
        d, _, state = heapq.heappop(heap)
        if d > dist[state]:
            continue
        done, lay, open_e = state
        if done == two_mask:
            goal = state
            break
        moves = []
        for k in two:
            if done >> k & 1 or (pred[k] & two_mask) & ~done:
                continue
            g = gates[k]
            pa, pb = lay[g.qubits[0]], lay[g.qubits[1]]
            if _edge(pa, pb) in edges:
                moves.append(((done | 1 << k, lay,
                               _open_after(open_e, pa, pb, g.kind == "CNOT")),
                              cost_of[k], ("gate", k)))
        inv = {ph: lg for lg, ph in enumerate(lay)}
        for e in edges:
            p, q = e
            if p not in inv and q not in inv:
                continue
            new = list(lay)
            if p in inv:
                new[inv[p]] = q
            if q in inv:
                new[inv[q]] = p
            merged = e in open_e
            nxt = open_e if merged else _open_after(open_e, p, q, False)
            moves.append(((done, tuple(new), nxt), 1 if merged else 3,
                          ("swap", p, q)))
        for nstate, cost, act in moves:
            nd = d + cost
            if nd < dist.get(nstate, float("inf")):
                dist[nstate] = nd
                parent[nstate] = (state, act)
                tie += 1
                heapq.heappush(heap, (nd, tie, nstate))
    if goal is None:
        raise GateError("no routing found")
    actions = []
    s = goal
    while parent[s] is not None:
        s, act = parent[s]
        actions.append(act)
    actions.reverse()
    sched = RoutingSchedule(tuple(s[1]), tuple(actions), tuple(pred), edges,
                            n_phys)
    return replay_routing(circuit, sched)


def replay_routing(circuit: Circuit, schedule: RoutingSchedule) -> Circuit:
    """Emit ``circuit`` following a schedule found by :func:`route_optimal`."""
    gates = circuit.gates
    n_g = len(gates)
    if n_g != len(schedule.pred):
        raise GateError("circuit does not match the routing schedule")
    pred = schedule.pred
    layout = list(schedule.initial_layout)
    out: list[PlacedGate] = []
    emitted = 0
    added = swaps = 0

    def flush(mask: int) -> None:
        nonlocal emitted
        for i in range(n_g):
            if mask >> i & 1 and not emitted >> i & 1:
                out.append(gates[i].relabel(layout))
                emitted |= 1 << i

    for act in schedule.actions:
        if act[0] == "gate":
            flush(pred[act[1]] | 1 << act[1])
            continue
        _, p, q = act
        added += _emit_swap(out, p, q)
        swaps += 1
        for k, ph in enumerate(layout):
            if ph == p:
                layout[k] = q
            elif ph == q:
                layout[k] = p
    flush((1 << n_g) - 1)
    meta = {"added_cnots": added, "swaps": swaps, "schedule": schedule}
    return Circuit(schedule.n_physical, tuple(out), schedule.connectivity,
                   schedule.initial_layout, tuple(layout), meta)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------


def circuit_to_text(circuit: Circuit) -> str:
    """One gate per line: ``KIND q0[,q1[,q2]] [angle...]``."""
    lines = [f"# qubits {circuit.n_qubits}"]
    for g in circuit.gates:
        parts = [g.kind, ",".join(str(q) for q in g.qubits)]
        parts += [repr(float(p)) for p in g.params]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str, n_qubits: int | None = None) -> Circuit:
    gates = []
    declared = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            tok = line[1:].split()
            if len(tok) == 2 and tok[0] == "qubits":
                declared = int(tok[1])
            continue
        tok = line.split()
        if len(tok) < 2:
            raise GateError(f"malformed gate line {raw!r}")
        qubits = tuple(int(q) for q in tok[1].split(","))
        gates.append(PlacedGate(tok[0], qubits, tuple(float(p) for p in tok[2:])))
    n = n_qubits or declared
    if n is None:
        n = 1 + max((max(g.qubits) for g in gates), default=0)
    return Circuit(n, tuple(gates))
