"""
First-order rule extraction (FOIL) for the AO compilation.

Every learned computation of a domain (see `relaxed.rule_targets`) is
approximated by a rule over discrete propositions. Training samples pair a
quantized latent state and a binding of the rule variables with the value the
trained networks produce there (thresholded or codebook-assigned).

For each target value FOIL grows clauses greedily: a clause starts empty and
gains the candidate literal with the highest information gain

    gain = t * (log2(p1 / (p1 + n1)) - log2(p0 / (p0 + n0)))

until it covers no negatives, no literal has positive gain, or it reaches
`max_clause_length`. A clause is kept when its precision reaches
`min_precision`; covered positives are removed and the next clause starts.
Candidates are literals over the rule variables (and their negations) plus
one level of `exists` over a fresh variable `_t0`.
"""

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .conf import get_section
from .discretize import (
    TRUE_F,
    AndF,
    ExistsF,
    FirstOrderRule,
    FormulaEvaluator,
    Lit,
    OrF,
    latent_states,
    negate,
    quantize_state,
    quantize_value,
)
from .domain_model import ground_action
from .exceptions import Inseparable
from .relaxed import rule_targets
from .state_eval import apply_action, applicable, eval_expr

logger = logging.getLogger(__name__)

EXISTS_VAR = "_t0"


@dataclass(frozen=True)
class RuleSample:
    state: object
    universe: object
    binding: tuple
    label: object


# ------------------------------------------------------------------------------
# SAMPLES
# ------------------------------------------------------------------------------

def _groundings(universe, variables):
    pools = [universe.of_type(t) for _, t in variables]
    for combo in itertools.product(*pools):
        yield tuple(zip((n for n, _ in variables), combo))


def _ground(args, binding):
    b = dict(binding)
    return tuple(b.get(a, a) for a in args)


def collect_samples(domain, params, episodes, codebooks, targets=None, max_states=None):
    """
    Labelled samples for every rule target.

    Args:
        domain (Domain): Domain with bound slots.
        params (SlotParams): Trained parameters.
        episodes (list[Episode]): Source of latent states.
        codebooks (dict[str, Codebook]): Codebooks for every non-Boolean predicate.
        targets (list[RuleTarget], optional): Defaults to every target of the domain.
        max_states (int, optional): Cap on the number of latent states used.

    Returns:
        dict[str, Counter]: target key -> {RuleSample: count}.
    """
    targets = rule_targets(domain) if targets is None else targets
    samples = {t.key: Counter() for t in targets}
    schemas = {t.action for t in targets if t.kind == "effect"}

    with ad.no_grad():
        for state in latent_states(domain, params, episodes, max_states):
            universe = state.universe
            discrete = quantize_state(domain, state, codebooks)
            posts = {}
            for name in schemas:
                schema = domain.actions[name]
                for _, combo in _param_groundings(universe, schema):
                    action = ground_action(schema, combo)
                    if applicable(domain, state, action):
                        posts[(name, combo)] = apply_action(domain, state, action)

            for target in targets:
                bucket = samples[target.key]
                if target.kind == "derived":
                    for binding in _groundings(universe, target.variables):
                        label = discrete.value_of(target.predicate, _ground(target.head_args, binding))
                        bucket[RuleSample(discrete, universe, binding, label)] += 1
                elif target.kind == "test":
                    for binding in _groundings(universe, target.variables):
                        score = eval_expr(domain, state, target.expr, dict(binding))
                        bucket[RuleSample(discrete, universe, binding, score.item() > 0.5)] += 1
                else:
                    _effect_samples(domain, target, discrete, universe, posts, codebooks, bucket)
    return samples


def _param_groundings(universe, schema):
    variables = tuple((p.name, p.type or "object") for p in schema.parameters)
    for binding in _groundings(universe, variables):
        combo = tuple(o for _, o in binding)
        if schema.distinct and len(set(combo)) != len(combo):
            continue
        yield binding, combo


def _effect_samples(domain, target, discrete, universe, posts, codebooks, bucket):
    schema = domain.actions[target.action]
    info = domain.predicates[target.predicate]
    local = target.variables[len(schema.parameters):]
    for binding, combo in _param_groundings(universe, schema):
        post = posts.get((target.action, combo))
        if post is None:
            continue
        for extra in _groundings(universe, local):
            full = binding + extra
            node = post.value(target.predicate, _ground(target.head_args, full))
            bucket[RuleSample(discrete, universe, full, quantize_value(info, node, codebooks))] += 1


# ------------------------------------------------------------------------------
# CANDIDATE LITERALS
# ------------------------------------------------------------------------------

def _compatible(var_type, param_type):
    return param_type in (None, "object") or var_type == param_type


def vocabulary(domain, target):
    """Predicates a rule body for `target` may mention."""
    allowed = set(target.allowed_derived)
    names = set()
    for name, info in domain.predicates.items():
        if name == target.predicate and target.kind == "derived":
            continue
        if info.is_input or name in allowed:
            names.add(name)
    return names


def candidate_literals(domain, target, samples):
    """
    Candidate literals for `target`, positive and negated.

    Values are those observed in `samples`.
    """
    words = vocabulary(domain, target)
    seen = {}
    for sample in samples:
        for pred, _, value in sample.state.props:
            if pred in words:
                seen.setdefault(pred, set()).add(value)

    head = target.variables
    positive = []
    for pred in sorted(seen):
        info = domain.predicates[pred]
        pools = [[n for n, t in head if _compatible(t, p.type)] for p in info.parameters]
        for args in itertools.product(*pools):
            for value in sorted(seen[pred], key=repr):
                positive.append(Lit(pred, args, value))

    exist_types = sorted({t for t in domain.object_types if t != "object"}) or ["object"]
    for otype in exist_types:
        links, attrs = [], []
        for pred in sorted(seen):
            info = domain.predicates[pred]
            types = [p.type for p in info.parameters]
            if info.is_bool and len(types) >= 2:
                for pos, ty in enumerate(types):
                    if not _compatible(otype, ty):
                        continue
                    rest = [[n for n, t in head if _compatible(t, tt)] for i, tt in enumerate(types) if i != pos]
                    for others in itertools.product(*rest):
                        args = list(others)
                        args.insert(pos, EXISTS_VAR)
                        links.append(Lit(pred, tuple(args), True))
            if len(types) == 1 and _compatible(otype, types[0]):
                attrs.extend(Lit(pred, (EXISTS_VAR,), v) for v in sorted(seen[pred], key=repr))
        for link in links:
            positive.append(ExistsF(EXISTS_VAR, otype, link))
            positive.extend(ExistsF(EXISTS_VAR, otype, AndF((link, attr))) for attr in attrs)

    return positive + [negate(f) for f in positive]


# ------------------------------------------------------------------------------
# FOIL
# ------------------------------------------------------------------------------

def _coverage(candidates, samples):
    matrix = np.zeros((len(candidates), len(samples)), dtype=bool)
    for j, sample in enumerate(samples):
        ev = FormulaEvaluator(sample.state, sample.universe)
        binding = dict(sample.binding)
        for i, f in enumerate(candidates):
            matrix[i, j] = ev.holds(f, binding)
    return matrix


def _gain(p0, n0, p1, n1):
    with np.errstate(divide="ignore", invalid="ignore"):
        before = math.log2(p0 / (p0 + n0))
        after = np.log2(p1 / (p1 + n1))
        gain = p1 * (after - before)
    return np.where(p1 > 0, gain, -np.inf)


def foil(candidates, coverage, positive, weights, min_precision=0.95, max_clause_length=6):
    """
    Learn a disjunction of clauses separating `positive` samples from the rest.

    Args:
        candidates (list): Candidate literals.
        coverage (np.ndarray): (C, N) bool, coverage[i, j] iff candidate i holds on sample j.
        positive (np.ndarray): (N,) bool labels.
        weights (np.ndarray): (N,) sample counts.

    Returns:
        formula: OrF of clauses (a single clause or literal when possible).

    Raises:
        Inseparable: More than 1 - min_precision of the positive weight is
            left uncovered.
    """
    negative = ~positive
    uncovered = positive.copy()
    w = weights.astype(np.float64)
    cov_f = coverage.astype(np.float64)
    total = w[positive].sum()
    clauses = []

    while w[uncovered].sum() > 0:
        covered = np.ones_like(positive)
        literals = []
        while w[covered & negative].sum() > 0 and len(literals) < max_clause_length:
            p0 = w[covered & uncovered].sum()
            n0 = w[covered & negative].sum()
            p1 = cov_f @ (w * (covered & uncovered))
            n1 = cov_f @ (w * (covered & negative))
            gains = _gain(p0, n0, p1, n1)
            best = int(np.argmax(gains))
            if not gains[best] > 1e-12:
                break
            literals.append(candidates[best])
            covered &= coverage[best]
        gained = w[covered & uncovered].sum()
        precision = w[covered & positive].sum() / max(w[covered].sum(), 1e-12)
        if gained == 0 or precision < min_precision:
            break
        clauses.append(literals[0] if len(literals) == 1 else AndF(tuple(literals)))
        uncovered &= ~covered

    residual = w[uncovered].sum() / total if total else 0.0
    if residual > 1 - min_precision:
        raise Inseparable(f"{residual:.1%} of positives cannot be separated")
    return clauses[0] if len(clauses) == 1 else OrF(tuple(clauses))


def extract_rules(domain, target, samples, config=None):
    """
    Learn the rule of one target.

    Args:
        domain (Domain): Source domain.
        target (RuleTarget): What to learn.
        samples (Counter | list): RuleSamples (with counts).

    Returns:
        FirstOrderRule: One case per produced value, most frequent first; an
            empty rule when there are no samples.

    Raises:
        Inseparable: Some value cannot be separated from the others.
    """
    cfg = get_section("FOIL", config)
    counts = samples if isinstance(samples, Counter) else Counter(samples)
    rows = list(counts)
    if not rows:
        return FirstOrderRule(target.key, target.predicate, target.head_args, target.variables, (), target.is_bool)

    weights = np.array([counts[s] for s in rows], dtype=np.float64)
    labels = [s.label for s in rows]
    candidates = candidate_literals(domain, target, rows)
    coverage = _coverage(candidates, rows)

    frequency = Counter()
    for label, w in zip(labels, weights):
        frequency[label] += w
    if target.is_bool:
        values = [v for v in (True, False) if v in frequency]
    else:
        values = sorted(frequency, key=lambda v: (-frequency[v], repr(v)))

    cases = []
    for value in values:
        positive = np.array([lab == value and type(lab) is type(value) for lab in labels])
        if positive.all():
            cases.append((value, TRUE_F))
            continue
        try:
            body = foil(candidates, coverage, positive, weights, cfg["min_precision"], cfg["max_clause_length"])
        except Inseparable as exc:
            raise Inseparable(f"{target.key} = {value}: {exc}") from None
        cases.append((value, body))
    return FirstOrderRule(target.key, target.predicate, target.head_args, target.variables, tuple(cases), target.is_bool)


def extract_all_rules(domain, params, episodes, codebooks, config=None, max_states=None):
    """
    Learn a rule for every target of `domain`.

    Returns:
        dict[str, FirstOrderRule | None]: None for inseparable targets, which
            the AO compilation treats optimistically.
    """
    targets = rule_targets(domain)
    samples = collect_samples(domain, params, episodes, codebooks, targets, max_states)
    rules = {}
    for target in targets:
        try:
            rule = extract_rules(domain, target, samples[target.key], config)
        except Inseparable as exc:
            logger.warning("inseparable rule target: %s", exc)
            rules[target.key] = None
            continue
        acc = rule_accuracy(rule, samples[target.key])
        logger.info("rule %s: %d cases, accuracy %.3f", target.key, len(rule.cases), acc)
        rules[target.key] = rule
    return rules


def rule_accuracy(rule, samples):
    """Weighted fraction of samples whose label the rule reproduces."""
    counts = samples if isinstance(samples, Counter) else Counter(samples)
    total = sum(counts.values())
    if not total:
        return 1.0
    hits = 0
    for sample, n in counts.items():
        predicted = rule.predict(FormulaEvaluator(sample.state, sample.universe), dict(sample.binding))
        if predicted == sample.label and type(predicted) is type(sample.label):
            hits += n
    return hits / total
