"""Multi-machine network model with classical generators.

Covers network description parsing, Newton-Raphson AC power flow, the
pre-fault operating point, Kron reduction to generator internal nodes and
the swing-equation right-hand side.

Conventions: angles in rad, relative rotor speeds in rad/s, powers in p.u.
on ``base_mva``.  The inertia coefficient ``M = 2H / omega_s`` so that
``M * domega/dt = P_m - P_e`` holds with omega in rad/s.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    NetworkValidationError,
    PowerFlowError,
    ReductionError,
)

FAULT_CONDUCTANCE = 1.0e6
BUILTIN_NETWORKS = {"ieee39": "ieee39.net"}
BUS_TYPES = ("slack", "PV", "PQ")
# The builtin case is first-swing unstable for both study faults at its
# nominal loading; the studies run it at this fraction of nominal.
DEFAULT_LOADING = 0.45


@dataclass(frozen=True)
class Bus:
    id: int
    type: str
    v_set: float = 1.0
    p_load: float = 0.0
    q_load: float = 0.0


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0
    tap: float = 1.0
    in_service: bool = True

    def connects(self, a: int, b: int) -> bool:
        return {self.from_bus, self.to_bus} == {a, b}


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    xd_prime: float
    inertia: float | None  # M in p.u. s^2/rad; None for the infinite bus
    p_gen: float = 0.0
    infinite: bool = False


@dataclass(frozen=True)
class NetworkModel:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    base_mva: float = 100.0
    frequency_hz: float = 60.0
    name: str = ""

    def __post_init__(self):
        validate_network(self)

    @property
    def omega_s(self) -> float:
        return 2.0 * math.pi * self.frequency_hz

    @property
    def bus_index(self) -> dict[int, int]:
        return {bus.id: k for k, bus in enumerate(self.buses)}

    @property
    def slack_bus(self) -> Bus:
        return next(b for b in self.buses if b.type == "slack")

    @property
    def dynamic_generators(self) -> tuple[Generator, ...]:
        return tuple(g for g in self.generators if not g.infinite)

    @property
    def inertia(self) -> np.ndarray:
        """Inertia coefficients of the dynamic generators, in generator order."""
        return np.array([g.inertia for g in self.dynamic_generators], dtype=float)

    def generator(self, gen_id: int) -> Generator:
        for g in self.generators:
            if g.id == gen_id:
                return g
        raise KeyError(f"no generator {gen_id}")

    def find_branch(self, a: int, b: int) -> int:
        for k, br in enumerate(self.branches):
            if br.connects(a, b):
                return k
        raise NetworkValidationError(f"branch {a}-{b} does not exist")

    def without_branch(self, a: int, b: int) -> "NetworkModel":
        k = self.find_branch(a, b)
        branches = list(self.branches)
        branches[k] = replace(branches[k], in_service=False)
        return replace(self, branches=tuple(branches))


def inertia_from_h(h: float, frequency_hz: float = 60.0) -> float:
    return 2.0 * h / (2.0 * math.pi * frequency_hz)


def validate_network(net: NetworkModel) -> None:
    if not net.buses:
        raise NetworkValidationError("network has no buses")
    if not net.branches:
        raise NetworkValidationError("network has no branches")
    ids = [b.id for b in net.buses]
    if len(set(ids)) != len(ids):
        raise NetworkValidationError("duplicate bus ids")
    for bus in net.buses:
        if bus.type not in BUS_TYPES:
            raise NetworkValidationError(f"bus {bus.id}: unknown type {bus.type!r}")
        if not bus.v_set > 0:
            raise NetworkValidationError(f"bus {bus.id}: non-positive voltage setpoint")
    n_slack = sum(b.type == "slack" for b in net.buses)
    if n_slack != 1:
        raise NetworkValidationError(f"expected exactly one slack bus, found {n_slack}")
    known = set(ids)
    for br in net.branches:
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                raise NetworkValidationError(
                    f"branch {br.from_bus}-{br.to_bus} references missing bus {end}")
        if br.from_bus == br.to_bus:
            raise NetworkValidationError(f"branch {br.from_bus}-{br.to_bus} is a self loop")
        if not br.x > 0:
            raise NetworkValidationError(
                f"branch {br.from_bus}-{br.to_bus}: non-positive reactance {br.x}")
        if not br.tap > 0:
            raise NetworkValidationError(f"branch {br.from_bus}-{br.to_bus}: non-positive tap")
    gids = [g.id for g in net.generators]
    if len(set(gids)) != len(gids):
        raise NetworkValidationError("duplicate generator ids")
    gen_buses = [g.bus for g in net.generators]
    if len(set(gen_buses)) != len(gen_buses):
        raise NetworkValidationError("more than one generator on a bus")
    types = {b.id: b.type for b in net.buses}
    for g in net.generators:
        if g.bus not in known:
            raise NetworkValidationError(f"generator {g.id} references missing bus {g.bus}")
        if types[g.bus] == "PQ":
            raise NetworkValidationError(f"generator {g.id} sits on PQ bus {g.bus}")
        if not g.xd_prime > 0:
            raise NetworkValidationError(
                f"generator {g.id}: non-positive transient reactance {g.xd_prime}")
        if not g.infinite and not (g.inertia is not None and g.inertia > 0):
            raise NetworkValidationError(f"generator {g.id}: inertia must be positive")
    if sum(g.infinite for g in net.generators) > 1:
        raise NetworkValidationError("at most one infinite-bus generator is supported")


# --------------------------------------------------------------------------
# Network description files
# --------------------------------------------------------------------------

def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y"):
        return True
    if t in ("0", "false", "no", "n", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _read_sections(text: str) -> dict[str, list[str]]:
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections[current] = []
        elif current is None:
            raise NetworkValidationError(f"content outside a section: {line!r}")
        else:
            sections[current].append(line)
    return sections


def _table(lines: list[str], section: str, required: tuple[str, ...]) -> list[dict[str, str]]:
    if not lines:
        return []
    header = [h.strip() for h in lines[0].split(",")]
    missing = [c for c in required if c not in header]
    if missing:
        raise NetworkValidationError(f"[{section}] missing columns: {', '.join(missing)}")
    rows = []
    for n, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(header):
            raise NetworkValidationError(
                f"[{section}] row {n}: expected {len(header)} fields, got {len(cells)}")
        rows.append(dict(zip(header, cells)))
    return rows


def parse_network(text: str) -> NetworkModel:
    """Parse a network description (sections [system], [buses], [branches], [generators])."""
    sections = _read_sections(text)
    system = {}
    for line in sections.get("system", []):
        key, _, value = line.partition("=")
        system[key.strip()] = value.strip()
    try:
        base_mva = float(system.get("base_mva", 100.0))
        freq = float(system.get("frequency_hz", 60.0))
        buses = tuple(
            Bus(int(r["id"]), r["type"], float(r.get("v_set") or 1.0),
                float(r.get("p_load") or 0.0), float(r.get("q_load") or 0.0))
            for r in _table(sections.get("buses", []), "buses", ("id", "type")))
        branches = tuple(
            Branch(int(r["from"]), int(r["to"]), float(r["r"]), float(r["x"]),
                   float(r.get("b") or 0.0), float(r.get("tap") or 1.0),
                   _parse_bool(r.get("in_service", "1")))
            for r in _table(sections.get("branches", []), "branches", ("from", "to", "r", "x")))
        generators = []
        for r in _table(sections.get("generators", []), "generators", ("id", "bus", "xd_prime")):
            infinite = _parse_bool(r.get("infinite", "0"))
            if r.get("M") not in (None, "", "-"):
                inertia = float(r["M"])
            elif r.get("H") not in (None, "", "-"):
                inertia = inertia_from_h(float(r["H"]), freq)
            else:
                inertia = None
            generators.append(Generator(int(r["id"]), int(r["bus"]), float(r["xd_prime"]),
                                        None if infinite else inertia,
                                        float(r.get("p_gen") or 0.0), infinite))
    except (KeyError, ValueError) as exc:
        if isinstance(exc, NetworkValidationError):
            raise
        raise NetworkValidationError(f"malformed network description: {exc}") from exc
    return NetworkModel(buses, branches, tuple(generators), base_mva, freq,
                        system.get("name", ""))


def load_network(source: str | Path) -> NetworkModel:
    """Load a builtin network by name (``"ieee39"``) or parse a description file."""
    if isinstance(source, str) and source in BUILTIN_NETWORKS:
        text = resources.files("koopman_inertia.data").joinpath(
            BUILTIN_NETWORKS[source]).read_text()
        return parse_network(text)
    path = Path(source)
    if not path.is_file():
        raise NetworkValidationError(f"network {source!s} is neither builtin nor a file")
    return parse_network(path.read_text())


# --------------------------------------------------------------------------
# Admittance matrices and power flow
# --------------------------------------------------------------------------

def build_ybus(net: NetworkModel) -> np.ndarray:
    """Bus admittance matrix of the in-service branches (off-nominal tap on the from side)."""
    idx = net.bus_index
    n = len(net.buses)
    Y = np.zeros((n, n), dtype=complex)
    for br in net.branches:
        if not br.in_service:
            continue
        f, t = idx[br.from_bus], idx[br.to_bus]
        ys = 1.0 / complex(br.r, br.x)
        ysh = 0.5j * br.b
        Y[f, f] += (ys + ysh) / br.tap**2
        Y[t, t] += ys + ysh
        Y[f, t] -= ys / br.tap
        Y[t, f] -= ys / br.tap
    return Y


@dataclass(frozen=True, eq=False)
class PowerFlowResult:
    voltage: np.ndarray  # complex bus voltages in bus order
    iterations: int
    mismatch: float  # infinity norm of the final P/Q mismatch, p.u.
    ybus: np.ndarray = field(repr=False)

    @property
    def injection(self) -> np.ndarray:
        V = self.voltage
        return V * np.conj(self.ybus @ V)


def _scheduled_injection(net: NetworkModel) -> np.ndarray:
    S = np.array([-complex(b.p_load, b.q_load) for b in net.buses])
    idx = net.bus_index
    for g in net.generators:
        S[idx[g.bus]] += g.p_gen
    return S


def power_mismatch(net: NetworkModel, voltage: np.ndarray, ybus: np.ndarray | None = None) -> np.ndarray:
    """P mismatch at PV/PQ buses followed by Q mismatch at PQ buses."""
    Y = build_ybus(net) if ybus is None else ybus
    mis = voltage * np.conj(Y @ voltage) - _scheduled_injection(net)
    pv_pq = [k for k, b in enumerate(net.buses) if b.type != "slack"]
    pq = [k for k, b in enumerate(net.buses) if b.type == "PQ"]
    return np.concatenate([mis.real[pv_pq], mis.imag[pq]])


def solve_power_flow(net: NetworkModel, tol: float = 1e-8, max_iter: int = 50) -> PowerFlowResult:
    """Newton-Raphson AC power flow in polar coordinates."""
    Y = build_ybus(net)
    types = [b.type for b in net.buses]
    pv_pq = np.array([k for k, t in enumerate(types) if t != "slack"], dtype=int)
    pq = np.array([k for k, t in enumerate(types) if t == "PQ"], dtype=int)
    Vm = np.array([b.v_set if b.type != "PQ" else 1.0 for b in net.buses])
    Va = np.zeros(len(net.buses))
    V = Vm * np.exp(1j * Va)

    norm = np.inf
    for it in range(max_iter + 1):
        F = power_mismatch(net, V, Y)
        norm = float(np.max(np.abs(F))) if F.size else 0.0
        if not np.isfinite(norm):
            raise PowerFlowError(f"power flow diverged at iteration {it}", it, norm)
        if norm < tol:
            return PowerFlowResult(V, it, norm, Y)
        if it == max_iter:
            break
        Ibus = Y @ V
        Vnorm = V / np.abs(V)
        dS_dVm = np.diag(V) @ np.conj(Y @ np.diag(Vnorm)) + np.diag(np.conj(Ibus) * Vnorm)
        dS_dVa = 1j * np.diag(V) @ np.conj(np.diag(Ibus) - Y @ np.diag(V))
        J = np.block([
            [dS_dVa.real[np.ix_(pv_pq, pv_pq)], dS_dVm.real[np.ix_(pv_pq, pq)]],
            [dS_dVa.imag[np.ix_(pq, pv_pq)], dS_dVm.imag[np.ix_(pq, pq)]],
        ])
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            raise PowerFlowError(f"singular Jacobian at iteration {it}", it, norm) from None
        Va[pv_pq] += dx[: len(pv_pq)]
        Vm[pq] += dx[len(pv_pq):]
        V = Vm * np.exp(1j * Va)
    raise PowerFlowError(
        f"power flow did not converge in {max_iter} iterations (mismatch {norm:.3e} p.u.)",
        max_iter, norm)


# --------------------------------------------------------------------------
# Kron reduction and the classical machine model
# --------------------------------------------------------------------------

class Phase(str, enum.Enum):
    PRE_FAULT = "pre-fault"
    FAULT_ON = "fault-on"
    POST_FAULT = "post-fault"


@dataclass(frozen=True)
class FaultScenario:
    """Three-phase fault at ``bus`` cleared by tripping branch ``trip``."""

    bus: int
    trip: tuple[int, int]
    cycles: float
    start: float = 0.0

    def __post_init__(self):
        if not self.cycles > 0:
            raise NetworkValidationError("fault duration must be positive")
        if self.start < 0:
            raise NetworkValidationError("fault start must be non-negative")

    def duration(self, frequency_hz: float = 60.0) -> float:
        return self.cycles / frequency_hz

    def validate(self, net: NetworkModel) -> None:
        if self.bus not in net.bus_index:
            raise NetworkValidationError(f"faulted bus {self.bus} does not exist")
        k = net.find_branch(*self.trip)
        if not net.branches[k].in_service:
            raise NetworkValidationError(
                f"tripped branch {self.trip[0]}-{self.trip[1]} is already out of service")


CASE_I = FaultScenario(bus=16, trip=(16, 17), cycles=10)
CASE_II = FaultScenario(bus=23, trip=(22, 23), cycles=15)
CASES = {"i": CASE_I, "ii": CASE_II}


def kron_eliminate(Y: np.ndarray, keep, labels=None) -> np.ndarray:
    """Eliminate every node not in ``keep``: Y_kk - Y_ke Y_ee^-1 Y_ek."""
    n = Y.shape[0]
    keep = list(keep)
    elim = [k for k in range(n) if k not in set(keep)]
    if not elim:
        return Y[np.ix_(keep, keep)].copy()
    Yee = Y[np.ix_(elim, elim)]
    labels = list(range(n)) if labels is None else list(labels)
    for row, k in enumerate(elim):
        if not np.any(Yee[row]):
            raise ReductionError(f"bus {labels[k]} is isolated; cannot eliminate it", labels[k])
    try:
        X = np.linalg.solve(Yee, Y[np.ix_(elim, keep)])
    except np.linalg.LinAlgError:
        raise ReductionError("singular interior block during Kron reduction") from None
    if not np.all(np.isfinite(X)):
        raise ReductionError("singular interior block during Kron reduction")
    return Y[np.ix_(keep, keep)] - Y[np.ix_(keep, elim)] @ X


@dataclass(frozen=True, eq=False)
class ReducedNetwork:
    """Admittance among generator internal nodes for one topology phase.

    Rows/columns follow ``net.generators`` order. ``dynamic`` holds the
    positions of the non-infinite generators; ``p_mech`` and ``inertia`` are
    aligned with them.
    """

    admittance: np.ndarray
    phase: Phase
    emf: np.ndarray
    gen_ids: tuple[int, ...]
    dynamic: np.ndarray
    infinite_angle: float | None
    p_mech: np.ndarray
    inertia: np.ndarray

    @property
    def n_dynamic(self) -> int:
        return len(self.dynamic)


@dataclass(frozen=True, eq=False)
class OperatingPoint:
    """Pre-fault equilibrium derived from the power flow."""

    power_flow: PowerFlowResult
    gen_power: np.ndarray  # complex generator output, generator order
    emf: np.ndarray  # complex internal EMF, generator order
    load_admittance: np.ndarray  # constant-impedance loads, bus order
    p_mech: np.ndarray  # dynamic generators

    @property
    def angles(self) -> np.ndarray:
        return np.angle(self.emf)


@dataclass(frozen=True, eq=False)
class SystemState:
    delta: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        if self.delta.shape != self.omega.shape:
            raise DimensionError("delta and omega must have the same shape")

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.delta, self.omega])

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "SystemState":
        n = len(x) // 2
        return cls(np.asarray(x[:n], dtype=float), np.asarray(x[n:], dtype=float))


def _augmented_admittance(net: NetworkModel, load_admittance: np.ndarray) -> np.ndarray:
    Ybus = build_ybus(net) + np.diag(load_admittance)
    nb, ng = len(net.buses), len(net.generators)
    Y = np.zeros((nb + ng, nb + ng), dtype=complex)
    Y[:nb, :nb] = Ybus
    idx = net.bus_index
    for k, g in enumerate(net.generators):
        y = 1.0 / (1j * g.xd_prime)
        b, i = idx[g.bus], nb + k
        Y[b, b] += y
        Y[i, i] += y
        Y[b, i] -= y
        Y[i, b] -= y
    return Y


def _reduce(net: NetworkModel, load_admittance: np.ndarray, fault_bus: int | None = None) -> np.ndarray:
    Y = _augmented_admittance(net, load_admittance)
    if fault_bus is not None:
        k = net.bus_index[fault_bus]
        Y[k, k] += FAULT_CONDUCTANCE
    nb = len(net.buses)
    labels = [b.id for b in net.buses] + [f"internal-{g.id}" for g in net.generators]
    keep = range(nb, nb + len(net.generators))
    return kron_eliminate(Y, keep, labels)


def _internal_power(Yred: np.ndarray, E: np.ndarray) -> np.ndarray:
    return (E * np.conj(Yred @ E)).real


def operating_point(net: NetworkModel, pf: PowerFlowResult | None = None) -> OperatingPoint:
    if not net.generators:
        raise NetworkValidationError("network has no generators")
    pf = solve_power_flow(net) if pf is None else pf
    idx = net.bus_index
    V = pf.voltage
    S_inj = pf.injection
    loads = np.array([complex(b.p_load, b.q_load) for b in net.buses])
    gen_power = np.array([S_inj[idx[g.bus]] + loads[idx[g.bus]] for g in net.generators])
    Vg = np.array([V[idx[g.bus]] for g in net.generators])
    xd = np.array([g.xd_prime for g in net.generators])
    emf = Vg + 1j * xd * np.conj(gen_power / Vg)
    load_y = np.conj(loads) / np.abs(V) ** 2
    Yred = _reduce(net, load_y)
    dyn = [k for k, g in enumerate(net.generators) if not g.infinite]
    p_mech = _internal_power(Yred, emf)[dyn]
    return OperatingPoint(pf, gen_power, emf, load_y, p_mech)


def kron_reduce(net: NetworkModel, phase: Phase | str = Phase.PRE_FAULT,
                scenario: FaultScenario | None = None,
                op: OperatingPoint | None = None) -> ReducedNetwork:
    """Reduce the network (loads as constant impedances) to the generator internal nodes.

    The fault-on phase adds a large shunt conductance at the faulted bus; the
    post-fault phase removes the tripped branch.
    """
    phase = Phase(phase)
    op = operating_point(net) if op is None else op
    topo, fault_bus = net, None
    if phase is not Phase.PRE_FAULT:
        if scenario is None:
            raise NetworkValidationError(f"phase {phase.value} needs a fault scenario")
        scenario.validate(net)
        if phase is Phase.FAULT_ON:
            fault_bus = scenario.bus
        else:
            topo = net.without_branch(*scenario.trip)
    Yred = _reduce(topo, op.load_admittance, fault_bus)
    dyn = np.array([k for k, g in enumerate(net.generators) if not g.infinite], dtype=int)
    inf = [k for k, g in enumerate(net.generators) if g.infinite]
    return ReducedNetwork(
        admittance=Yred,
        phase=phase,
        emf=np.abs(op.emf),
        gen_ids=tuple(g.id for g in net.generators),
        dynamic=dyn,
        infinite_angle=float(np.angle(op.emf[inf[0]])) if inf else None,
        p_mech=op.p_mech.copy(),
        inertia=net.inertia,
    )


def _full_angles(red: ReducedNetwork, delta: np.ndarray) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (red.n_dynamic,):
        raise DimensionError(f"expected {red.n_dynamic} rotor angles, got shape {delta.shape}")
    full = np.empty(len(red.gen_ids))
    if red.infinite_angle is not None:
        full[:] = red.infinite_angle
    full[red.dynamic] = delta
    return full


def electrical_power(red: ReducedNetwork, delta) -> np.ndarray:
    """P_e,i = sum_j E_i E_j (G_ij cos d_ij + B_ij sin d_ij) for the dynamic generators."""
    theta = _full_angles(red, delta)
    E = red.emf * np.exp(1j * theta)
    return _internal_power(red.admittance, E)[red.dynamic]


def accelerating_power(red: ReducedNetwork, delta) -> np.ndarray:
    return red.p_mech - electrical_power(red, delta)


def swing_rhs(state: SystemState, red: ReducedNetwork, damping: float = 0.0) -> SystemState:
    """Time derivative of (delta, omega) under the classical swing equations."""
    dP = accelerating_power(red, state.delta)
    if state.omega.shape != dP.shape:
        raise DimensionError("omega has the wrong dimension")
    if damping:
        dP = dP - damping * state.omega
    return SystemState(state.omega.copy(), dP / red.inertia)


def equilibrium_state(op: OperatingPoint, net: NetworkModel) -> SystemState:
    dyn = [k for k, g in enumerate(net.generators) if not g.infinite]
    delta = op.angles[dyn]
    return SystemState(delta, np.zeros_like(delta))


def scale_loading(net: NetworkModel, factor: float) -> NetworkModel:
    """Scale every load and every scheduled generator output by ``factor``."""
    if not factor > 0:
        raise NetworkValidationError("loading factor must be positive")
    buses = tuple(replace(b, p_load=b.p_load * factor, q_load=b.q_load * factor)
                  for b in net.buses)
    gens = tuple(replace(g, p_gen=g.p_gen * factor) for g in net.generators)
    return replace(net, buses=buses, generators=gens)
