"""Branch-ledger simulator for measurement scenarios.

A state vector is a list of branches; each branch carries one complex
amplitude and a closed record map (every subsystem named by the scenario
appears exactly once).  Evolution rules are structurally amplitude blind:
a rule's guard and effect receive only the record map, never the branch
amplitude, so per-branch evolution cannot depend on the coefficients.
That structural constraint is the whole point: record structure after any
rule sequence is a function of the rules alone, and amplitudes ride along
multiplicatively.

Built-in scenarios: ``mirror`` (two detectors and an observer),
``two_observers`` (adds a second observer who reports agreement),
``grains`` (one spread-out wave over N film grains, exactly one exposure
per branch), ``trajectory`` (L grain layers; straight dynamics gives N
collinear-exposure branches, an optional lateral hop of one lane widens
them to adjacent-lane paths).
"""

from __future__ import annotations

import cmath
import inspect
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .report import RelationReport

NORM_TOL = 1e-12


class NonUnitaryRule(ValueError):
    """A rule's split weights do not preserve the branch norm."""


class BadParams(ValueError):
    """Scenario parameters are inconsistent."""


class RuleConstructionError(TypeError):
    """A rule callable does not have the records-only signature."""


class DegeneratePhases(ValueError):
    """The supplied phase pairs cannot separate the two components."""


# ----------------------------------------------------------------------
# branches, rules, evolution
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class Branch:
    amplitude: complex
    records: Mapping[str, str]

    def record_items(self) -> tuple[tuple[str, str], ...]:
        return tuple(sorted(self.records.items()))


@dataclass
class StateVector:
    branches: list[Branch]

    def norm2(self) -> float:
        return float(sum(abs(b.amplitude) ** 2 for b in self.branches))

    def record_structure(self) -> tuple[tuple[tuple[str, str], ...], ...]:
        """Amplitude-free signature of the ledger, in branch order."""
        return tuple(b.record_items() for b in self.branches)

    def subsystems(self) -> frozenset[str]:
        keys = {k for b in self.branches for k in b.records}
        return frozenset(keys)


Effect = list[tuple[complex, dict[str, str]]]


def _records_only(fn: Callable, kind: str) -> None:
    try:
        sig = inspect.signature(fn)
    except (TypeError, ValueError):
        raise RuleConstructionError(f"{kind} must be a plain callable")
    positional = [p for p in sig.parameters.values()
                  if p.kind in (p.POSITIONAL_ONLY, p.POSITIONAL_OR_KEYWORD)
                  and p.default is p.empty]
    if len(positional) != 1:
        raise RuleConstructionError(
            f"{kind} must take exactly the record map; amplitudes are not "
            f"readable by construction (got {len(positional)} required args)")


@dataclass
class Rule:
    """One amplitude-blind evolution step.

    ``guard`` decides from the records whether the rule acts on a branch;
    ``effect`` maps the records to a list of (weight, record rewrite)
    children.  Non-matching branches pass through unchanged.  Weights must
    satisfy sum |w|^2 = 1 unless the rule is flagged non-unitary.
    """

    name: str
    guard: Callable[[Mapping[str, str]], bool]
    effect: Callable[[Mapping[str, str]], Effect]
    non_unitary: bool = False

    def __post_init__(self) -> None:
        _records_only(self.guard, f"rule {self.name!r} guard")
        _records_only(self.effect, f"rule {self.name!r} effect")


def static_effect(children: Effect) -> Callable[[Mapping[str, str]], Effect]:
    def effect(records: Mapping[str, str]) -> Effect:
        return children
    return effect


def apply_rule(state: StateVector, rule: Rule) -> StateVector:
    """Evolve each branch independently; no cross-branch reads are possible."""
    subsystems = state.subsystems()
    out: list[Branch] = []
    for branch in state.branches:
        view = MappingProxyType(dict(branch.records))
        if not rule.guard(view):
            out.append(branch)
            continue
        children = rule.effect(view)
        weight_norm = sum(abs(w) ** 2 for w, _ in children)
        if not rule.non_unitary and abs(weight_norm - 1.0) > NORM_TOL:
            raise NonUnitaryRule(
                f"rule {rule.name!r} split norm is {weight_norm!r}")
        for weight, rewrite in children:
            stray = set(rewrite) - set(subsystems)
            if stray:
                raise BadParams(f"rule {rule.name!r} writes unknown subsystems {stray}")
            records = {**branch.records, **rewrite}
            out.append(Branch(branch.amplitude * weight, records))
    return StateVector(out)


def apply_rules(state: StateVector, rules: Iterable[Rule]) -> StateVector:
    for rule in rules:
        state = apply_rule(state, rule)
    return state


# ----------------------------------------------------------------------
# scenarios
# ----------------------------------------------------------------------
def _as_amp_pair(params: Mapping) -> tuple[complex, complex]:
    amps = params.get("amps")
    if amps is None:
        r = 1 / math.sqrt(2)
        return complex(r), complex(r)
    if len(amps) != 2:
        raise BadParams("mirror scenarios need exactly two amplitudes")
    a, b = complex(amps[0]), complex(amps[1])
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1.0) > NORM_TOL:
        raise BadParams("amplitudes must have unit norm")
    return a, b


def _grain_weights(params: Mapping, n: int) -> list[complex]:
    weights = params.get("weights")
    if weights is None:
        return [complex(1 / math.sqrt(n))] * n
    if len(weights) != n:
        raise BadParams("weight count must match grain count")
    ws = [complex(w) for w in weights]
    if abs(sum(abs(w) ** 2 for w in ws) - 1.0) > NORM_TOL:
        raise BadParams("grain weights must have unit norm")
    return ws


OBS_SEES = 'I see only {h}, {v}'
OBS2_SEES = "I see {h}, {v}, in agreement with Obs. 1."


def mirror_rules(amp_h: complex, amp_v: complex,
                 with_second_observer: bool = False) -> list[Rule]:
    split = Rule(
        "beam-splitter",
        guard=lambda rec: rec["photon"] == "source",
        effect=static_effect([(amp_h, {"photon": "H-path"}),
                              (amp_v, {"photon": "V-path"})]),
    )

    def detect(rec: Mapping[str, str]) -> Effect:
        hit_h = rec["photon"] == "H-path"
        return [(1.0, {"photon": "absorbed",
                       "DetH": "yes" if hit_h else "no",
                       "DetV": "no" if hit_h else "yes"})]

    detectors = Rule("detectors",
                     guard=lambda rec: rec["photon"] in ("H-path", "V-path"),
                     effect=detect)

    def observe(rec: Mapping[str, str]) -> Effect:
        return [(1.0, {"Obs1": OBS_SEES.format(h=rec["DetH"], v=rec["DetV"])})]

    rules = [split, detectors,
             Rule("observer-1", guard=lambda rec: rec["Obs1"] == "", effect=observe)]
    if with_second_observer:
        def observe2(rec: Mapping[str, str]) -> Effect:
            return [(1.0, {"Obs2": OBS2_SEES.format(h=rec["DetH"], v=rec["DetV"])})]

        rules.append(Rule("observer-2",
                          guard=lambda rec: rec["Obs2"] == "", effect=observe2))
    return rules


def _mirror_initial(with_second_observer: bool) -> StateVector:
    records = {"photon": "source", "DetH": "no", "DetV": "no", "Obs1": ""}
    if with_second_observer:
        records["Obs2"] = ""
    return StateVector([Branch(1.0 + 0j, records)])


def _report(suite: str, relation: str, ok: bool, detail: str = "") -> RelationReport:
    return RelationReport(suite=suite, relation=relation, expected="true",
                          actual=detail or str(ok), residual="" if ok else detail,
                          passed=ok)


def run_mirror(params: Mapping, second_observer: bool = False
               ) -> tuple[StateVector, list[RelationReport]]:
    amp_h, amp_v = _as_amp_pair(params)
    state = apply_rules(_mirror_initial(second_observer),
                        mirror_rules(amp_h, amp_v, second_observer))
    suite = "branching:two_observers" if second_observer else "branching:mirror"
    reports = [
        _report(suite, "final state has exactly two branches",
                len(state.branches) == 2, f"{len(state.branches)} branches"),
        _report(suite, "norm is conserved",
                abs(state.norm2() - 1.0) <= NORM_TOL, f"norm2 = {state.norm2()!r}"),
        _report(suite, "no branch shows both detectors firing",
                all(not (b.records["DetH"] == "yes" and b.records["DetV"] == "yes")
                    for b in state.branches)),
        _report(suite, "each observer record reports a single outcome",
                all(b.records["Obs1"] == OBS_SEES.format(h=b.records["DetH"],
                                                         v=b.records["DetV"])
                    for b in state.branches)),
    ]
    if second_observer:
        agree = all(
            b.records["Obs2"] == OBS2_SEES.format(h=b.records["DetH"],
                                                  v=b.records["DetV"])
            for b in state.branches)
        reports.append(_report(suite, "observers never disagree on any branch", agree))
    return state, reports


def run_grains(params: Mapping) -> tuple[StateVector, list[RelationReport]]:
    n = int(params.get("n", 8))
    if n < 1:
        raise BadParams("need at least one grain")
    weights = _grain_weights(params, n)
    grain_keys = [f"grain-{j}" for j in range(1, n + 1)]
    records = {"electron": "incoming", "Obs": ""}
    records.update({k: "unexposed" for k in grain_keys})
    state = StateVector([Branch(1.0 + 0j, records)])

    spread = Rule(
        "grain-layer",
        guard=lambda rec: rec["electron"] == "incoming",
        effect=static_effect([
            (w, {"electron": f"at-grain-{j + 1}", grain_keys[j]: "exposed"})
            for j, w in enumerate(weights)]),
    )

    def observe(rec: Mapping[str, str]) -> Effect:
        exposed = [k for k in grain_keys if rec[k] == "exposed"]
        label = exposed[0].split("-", 1)[1] if len(exposed) == 1 else "?"
        return [(1.0, {"Obs": f"only grain {label} exposed"})]

    state = apply_rules(state, [
        spread, Rule("grain-observer", guard=lambda rec: rec["Obs"] == "",
                     effect=observe)])

    suite = "branching:grains"
    one_each = all(
        sum(1 for k in grain_keys if b.records[k] == "exposed") == 1
        for b in state.branches)
    obs_pure = all(
        b.records["Obs"] == "only grain " + next(
            k for k in grain_keys if b.records[k] == "exposed").split("-", 1)[1]
        + " exposed"
        for b in state.branches)
    reports = [
        _report(suite, f"exactly {n} branches", len(state.branches) == n,
                f"{len(state.branches)} branches"),
        _report(suite, "norm is conserved",
                abs(state.norm2() - 1.0) <= NORM_TOL, f"norm2 = {state.norm2()!r}"),
        _report(suite, "exactly one exposed grain per branch", one_each),
        _report(suite, "observer record is a pure function of own-branch grains",
                obs_pure),
    ]
    return state, reports


def run_trajectory(params: Mapping) -> tuple[StateVector, list[RelationReport]]:
    n = int(params.get("n", 8))
    layers = int(params.get("layers", 3))
    hop = int(params.get("hop", 0))
    if layers < 1 or n < 1:
        raise BadParams("need at least one layer and one grain per layer")
    if hop not in (0, 1):
        raise BadParams("lateral hop is at most one lane")
    weights = _grain_weights(params, n)

    keys = {(layer, lane): f"grain[{layer},{lane}]"
            for layer in range(1, layers + 1) for lane in range(1, n + 1)}
    records = {"electron": "incoming", "Obs": ""}
    records.update({k: "unexposed" for k in keys.values()})
    state = StateVector([Branch(1.0 + 0j, records)])

    first = Rule(
        "layer-1",
        guard=lambda rec: rec["electron"] == "incoming",
        effect=static_effect([
            (w, {"electron": f"lane-{lane}", keys[(1, lane)]: "exposed"})
            for lane, w in zip(range(1, n + 1), weights)]),
    )
    state = apply_rule(state, first)

    for layer in range(2, layers + 1):
        def advance(rec: Mapping[str, str], layer: int = layer) -> Effect:
            lane = int(rec["electron"].split("-", 1)[1])
            lanes = [lane + d for d in range(-hop, hop + 1)
                     if 1 <= lane + d <= n]
            w = 1 / math.sqrt(len(lanes))
            return [(w, {"electron": f"lane-{t}", keys[(layer, t)]: "exposed"})
                    for t in lanes]

        state = apply_rule(state, Rule(
            f"layer-{layer}",
            guard=lambda rec: rec["electron"].startswith("lane-"),
            effect=advance))

    def observe(rec: Mapping[str, str]) -> Effect:
        path = []
        for layer in range(1, layers + 1):
            lanes = [lane for lane in range(1, n + 1)
                     if rec[keys[(layer, lane)]] == "exposed"]
            path.append(lanes[0] if len(lanes) == 1 else 0)
        return [(1.0, {"Obs": "trajectory " + ",".join(map(str, path))})]

    state = apply_rule(state, Rule(
        "trajectory-observer", guard=lambda rec: rec["Obs"] == "", effect=observe))

    def branch_path(branch: Branch) -> list[list[int]]:
        return [[lane for lane in range(1, n + 1)
                 if branch.records[keys[(layer, lane)]] == "exposed"]
                for layer in range(1, layers + 1)]

    paths = [branch_path(b) for b in state.branches]
    one_per_layer = all(all(len(lanes) == 1 for lanes in p) for p in paths)
    if hop == 0:
        connected = all(len({lanes[0] for lanes in p}) == 1 for p in paths)
        shape = "collinear"
        expected_branches = n
    else:
        connected = all(
            all(abs(p[k + 1][0] - p[k][0]) <= 1 for k in range(layers - 1))
            for p in paths)
        shape = "adjacent-lane"
        expected_branches = None

    suite = "branching:trajectory"
    reports = [
        _report(suite, "norm is conserved",
                abs(state.norm2() - 1.0) <= NORM_TOL, f"norm2 = {state.norm2()!r}"),
        _report(suite, "exactly one exposure in every layer of every branch",
                one_per_layer),
        _report(suite, f"every branch traces a {shape} path", connected),
        _report(suite, "observer record matches own-branch exposures",
                all(b.records["Obs"] == "trajectory " +
                    ",".join(str(lanes[0]) for lanes in p)
                    for b, p in zip(state.branches, paths))),
    ]
    if expected_branches is not None:
        reports.insert(0, _report(
            suite, f"exactly {expected_branches} branches",
            len(state.branches) == expected_branches,
            f"{len(state.branches)} branches"))
    return state, reports


def rule_from_spec(doc: Mapping) -> Rule:
    """Build an amplitude-blind rule from its JSON form.

    The guard is an equality conjunction over records; the effect is a
    static list of {weight, set} children.  Weights may be numbers or
    [re, im] pairs.
    """
    try:
        name = doc["name"]
        guard_spec = dict(doc.get("guard") or {})
        effect_spec = doc["effect"]
    except KeyError as missing:
        raise BadParams(f"rule is missing field {missing}")

    def guard(records: Mapping[str, str], want=guard_spec) -> bool:
        return all(records.get(k) == v for k, v in want.items())

    children: Effect = []
    for child in effect_spec:
        w = child.get("weight", 1.0)
        weight = complex(w[0], w[1]) if isinstance(w, (list, tuple)) else complex(w)
        children.append((weight, {str(k): str(v)
                                  for k, v in (child.get("set") or {}).items()}))
    return Rule(name, guard=guard, effect=static_effect(children),
                non_unitary=bool(doc.get("non_unitary", False)))


def run_custom(params: Mapping) -> tuple[StateVector, list[RelationReport]]:
    """User-supplied initial records and rule list from a scenario file."""
    initial = params.get("initial")
    rules_spec = params.get("rules")
    if not isinstance(initial, Mapping) or not rules_spec:
        raise BadParams("custom scenarios need 'initial' records and 'rules'")
    state = StateVector([Branch(1.0 + 0j, {str(k): str(v)
                                           for k, v in initial.items()})])
    rules = [rule_from_spec(doc) for doc in rules_spec]
    state = apply_rules(state, rules)
    unitary = all(not r.non_unitary for r in rules)
    reports = [
        _report("branching:custom", "records stay closed",
                all(set(b.records) == set(initial) for b in state.branches)),
    ]
    if unitary:
        reports.append(_report(
            "branching:custom", "norm is conserved",
            abs(state.norm2() - 1.0) <= NORM_TOL, f"norm2 = {state.norm2()!r}"))
    return state, reports


SCENARIOS = {
    "mirror": lambda params: run_mirror(params, second_observer=False),
    "two_observers": lambda params: run_mirror(params, second_observer=True),
    "grains": run_grains,
    "trajectory": run_trajectory,
    "custom": run_custom,
}


def run_scenario(name: str, params: Mapping | None = None
                 ) -> tuple[StateVector, list[RelationReport]]:
    if name not in SCENARIOS:
        raise BadParams(f"unknown scenario {name!r}")
    return SCENARIOS[name](params or {})


def coefficient_independence_check(name: str, params_a: Mapping,
                                   params_b: Mapping) -> bool:
    """True when two amplitude assignments give identical record structures."""
    state_a, _ = run_scenario(name, params_a)
    state_b, _ = run_scenario(name, params_b)
    return state_a.record_structure() == state_b.record_structure()


# ----------------------------------------------------------------------
# branch energy-eigenstate lemma
# ----------------------------------------------------------------------
@dataclass
class EigenBranchReport:
    hypothesis_holds: bool
    conclusion_holds: bool
    implication_ok: bool
    worst_hypothesis_residual: float
    worst_conclusion_residual: float


def eigen_branch_check(m: np.ndarray, x: np.ndarray, y: np.ndarray,
                       eigenvalue: complex,
                       phases: Sequence[tuple[float, float]],
                       hypothesis_tol: float = 1e-10,
                       conclusion_tol: float = 1e-9) -> EigenBranchReport:
    """Check that phase-robust eigenvalue equations split componentwise.

    Hypothesis: M (e^{i theta} x + e^{i phi} y) = E (...) within tolerance
    for every supplied phase pair.  Conclusion: M x = E x and M y = E y.
    At least two phase pairs with a well-conditioned phase matrix are
    required, otherwise the separation argument is degenerate.
    """
    if len(phases) < 2:
        raise DegeneratePhases("need at least two phase pairs")
    coeffs = [(cmath.exp(1j * th), cmath.exp(1j * ph)) for th, ph in phases]
    best_det = max(abs(c1 * d2 - d1 * c2)
                   for i, (c1, d1) in enumerate(coeffs)
                   for c2, d2 in coeffs[i + 1:])
    if best_det < 1e-6:
        raise DegeneratePhases("phase pairs do not separate the components")

    m = np.asarray(m, dtype=complex)
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    worst_h = 0.0
    for c, d in coeffs:
        vec = c * x + d * y
        worst_h = max(worst_h, float(np.linalg.norm(m @ vec - eigenvalue * vec)))
    res_x = float(np.linalg.norm(m @ x - eigenvalue * x))
    res_y = float(np.linalg.norm(m @ y - eigenvalue * y))
    hypothesis = worst_h <= hypothesis_tol
    conclusion = max(res_x, res_y) <= conclusion_tol
    return EigenBranchReport(
        hypothesis_holds=hypothesis,
        conclusion_holds=conclusion,
        implication_ok=(not hypothesis) or conclusion,
        worst_hypothesis_residual=worst_h,
        worst_conclusion_residual=max(res_x, res_y),
    )


# ----------------------------------------------------------------------
# serialization helpers
# ----------------------------------------------------------------------
def ledger_payload(state: StateVector) -> list[dict]:
    return [{"amplitude": [b.amplitude.real, b.amplitude.imag],
             "records": dict(sorted(b.records.items()))}
            for b in state.branches]
