"""
Discretization of trained models: codebooks over latent values, discrete
states, and the first-order rule language used by the relaxed compilations.

A non-Boolean predicate value is quantized to the index of its nearest
codebook centroid, written `pred@k`. Boolean values are thresholded at 0.5.
Every (predicate, arguments) pair of a discrete state holds exactly one
value, so a discrete state is an SAS-style assignment; relaxed states reuse
the same formula evaluator while accumulating several values per pair.

Rule formulas:

    Lit(pred, args, value, negated)  (pred@value args); Boolean atoms use value True
    AndF / OrF                        conjunction / disjunction
    ExistsF / ForallF                 one quantified variable over an object type

A negated literal holds when the pair has some *other* value, which is
classical negation on discrete states and stays monotone on relaxed ones.
A pair carrying the optimistic value `opt` satisfies every literal over it.
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import kmeans_plusplus

from . import autodiff as ad
from .conf import default_seed, get_section
from .exceptions import EmptyInput, KTooLarge, MissingCodebook, PDSketchError
from .state_eval import evaluate_derived
from .trainer import encode_states

logger = logging.getLogger(__name__)

OPT = "opt"


# ------------------------------------------------------------------------------
# CODEBOOKS
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class Codebook:
    """
    Centroids quantizing one predicate's value space.

    Attributes:
        predicate (str): Quantized predicate.
        centroids (np.ndarray): (K, d) float64 array.
        kind (str): "kmeans", or "values" for integer-valued predicates
            (one code per observed value).
        objective (tuple[float]): Sum of squared distances per Lloyd iteration.
    """

    predicate: str
    centroids: np.ndarray
    kind: str = "kmeans"
    objective: tuple = ()

    @property
    def k(self):
        return int(self.centroids.shape[0])

    @property
    def dim(self):
        return int(self.centroids.shape[1])

    def assign_many(self, features):
        """Nearest-centroid codes; ties go to the lowest index."""
        x = np.asarray(features, dtype=np.float64).reshape(-1, self.dim)
        d2 = ((x[:, None, :] - self.centroids[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)

    def assign(self, vector):
        return int(self.assign_many(np.asarray(vector).reshape(1, -1))[0])

    def to_json(self):
        return {"kind": self.kind, "centroids": self.centroids.tolist()}

    @classmethod
    def from_json(cls, predicate, data):
        return cls(predicate, np.asarray(data["centroids"], dtype=np.float64).reshape(len(data["centroids"]), -1),
                   data.get("kind", "kmeans"))


def _as_matrix(features):
    x = np.asarray(features, dtype=np.float64)
    if x.size == 0:
        raise EmptyInput("no features to quantize")
    return x.reshape(x.shape[0], -1)


def _objective(x, centers, labels):
    return float(((x - centers[labels]) ** 2).sum())


def fit_codebook(features, k, seed=None, max_iter=100, predicate=""):
    """
    k-means++ initialization followed by Lloyd iterations.

    Args:
        features: (N, d) array-like.
        k (int): Number of codes, 1 <= k <= number of distinct rows.
        seed (int, optional): Initialization seed.
        max_iter (int): Iteration cap.
        predicate (str): Name recorded on the codebook.

    Raises:
        EmptyInput: No features.
        KTooLarge: k exceeds the number of distinct feature vectors.
    """
    x = _as_matrix(features)
    distinct = np.unique(x, axis=0).shape[0]
    if k < 1 or k > distinct:
        raise KTooLarge(f"{predicate or 'codebook'}: k={k} but only {distinct} distinct vectors")
    seed = default_seed() if seed is None else seed

    centers, _ = kmeans_plusplus(x, n_clusters=k, random_state=seed)
    centers = np.asarray(centers, dtype=np.float64)
    trace = []
    for _ in range(max_iter):
        labels = Codebook(predicate, centers).assign_many(x)
        trace.append(_objective(x, centers, labels))
        updated = centers.copy()
        for j in range(k):
            members = x[labels == j]
            if len(members):
                updated[j] = members.mean(axis=0)
        if np.array_equal(updated, centers):
            break
        centers = updated
    labels = Codebook(predicate, centers).assign_many(x)
    trace.append(_objective(x, centers, labels))
    logger.debug("%s: k=%d objective %.4f after %d iterations", predicate, k, trace[-1], len(trace) - 1)
    return Codebook(predicate, centers, "kmeans", tuple(trace))


def fit_value_codebook(features, predicate=""):
    """One code per distinct observed value, in sorted order."""
    x = _as_matrix(features)
    return Codebook(predicate, np.unique(x, axis=0), "values")


def finetune_codebook(codebook, features, lr=0.05, seed=None):
    """
    One straight-through pass: each feature pulls its nearest centroid toward it.
    """
    x = _as_matrix(features)
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    centers = codebook.centroids.copy()
    for i in rng.permutation(len(x)):
        j = Codebook(codebook.predicate, centers).assign(x[i])
        centers[j] += lr * (x[i] - centers[j])
    return Codebook(codebook.predicate, centers, codebook.kind, codebook.objective)


def quantized_predicates(domain):
    """Non-Boolean input and derived predicates, in declaration order."""
    return [p for p in domain.predicates.values() if not p.is_bool]


def latent_states(domain, params, episodes, limit=None):
    seen = 0
    for episode in sorted(episodes, key=lambda e: e.id):
        for state in encode_states(domain, params, episode):
            if limit is not None and seen >= limit:
                return
            seen += 1
            yield state


def collect_features(domain, params, episodes, max_states=None):
    """
    Latent values of every non-Boolean predicate over the states of `episodes`.

    Returns:
        dict[str, np.ndarray]: predicate -> (N, d) array.
    """
    wanted = {p.name for p in quantized_predicates(domain)}
    derived = {n for n in domain.derived if n in wanted}
    rows = {name: [] for name in wanted}
    with ad.no_grad():
        for state in latent_states(domain, params, episodes, max_states):
            for name, table in state.tables.items():
                if name in wanted:
                    rows[name].extend(np.atleast_1d(n.numpy()) for _, n in sorted(table.items()))
            for name, table in evaluate_derived(domain, state, derived).items():
                rows[name].extend(np.atleast_1d(n.numpy()) for _, n in sorted(table.items()))
    return {name: np.array(r) for name, r in rows.items() if r}


def build_codebooks(domain, params, episodes, config=None, seed=None):
    """
    Fit one codebook per non-Boolean predicate.

    Vector predicates get k-means codebooks with k = min(bins, distinct
    vectors); scalar predicates get value codebooks.
    """
    cfg = get_section("DISCRETIZE", config)
    features = collect_features(domain, params, episodes, cfg["max_states"])
    codebooks = {}
    for info in quantized_predicates(domain):
        x = features.get(info.name)
        if x is None:
            raise EmptyInput(f"no observed values for {info.name}")
        if info.return_type.kind != "vector":
            codebooks[info.name] = fit_value_codebook(x, info.name)
            continue
        distinct = np.unique(x.reshape(len(x), -1), axis=0).shape[0]
        k = min(int(cfg["bins"]), distinct)
        if k < cfg["bins"]:
            logger.info("%s: %d distinct values, using k=%d", info.name, distinct, k)
        book = fit_codebook(x, k, seed=seed, max_iter=cfg["max_iter"], predicate=info.name)
        if cfg["finetune"]:
            book = finetune_codebook(book, x, cfg["finetune_lr"], seed)
        codebooks[info.name] = book
    return codebooks


def codebooks_to_json(codebooks):
    return {name: book.to_json() for name, book in sorted(codebooks.items())}


def codebooks_from_json(data):
    return {name: Codebook.from_json(name, d) for name, d in data.items()}


# ------------------------------------------------------------------------------
# DISCRETE STATES
# ------------------------------------------------------------------------------

class DiscreteState:
    """Set of (predicate, argument tuple, value) propositions."""

    def __init__(self, props):
        self.props = frozenset(props)
        self._index = {}
        for pred, args, value in self.props:
            self._index.setdefault((pred, args), set()).add(value)

    def __iter__(self):
        return iter(sorted(self.props, key=repr))

    def __len__(self):
        return len(self.props)

    def __contains__(self, prop):
        return prop in self.props

    def __eq__(self, other):
        return isinstance(other, DiscreteState) and self.props == other.props

    def __hash__(self):
        return hash(self.props)

    def values_of(self, predicate, args):
        return self._index.get((predicate, tuple(args)), ())

    def value_of(self, predicate, args):
        values = self.values_of(predicate, args)
        return next(iter(values)) if len(values) == 1 else None


def quantize_value(info, node, codebooks):
    """Discrete value of one entry: a bool for Boolean predicates, a code otherwise."""
    if info.is_bool:
        return node.item() > 0.5
    book = codebooks.get(info.name)
    if book is None:
        raise MissingCodebook(f"no codebook for {info.name}")
    return book.assign(np.atleast_1d(node.numpy()))


def quantize_state(domain, state, codebooks, include_derived=True):
    """
    Discretize a FactoredState.

    Args:
        domain (Domain): Domain of the state.
        state (FactoredState): Latent state.
        codebooks (dict[str, Codebook]): One per non-Boolean predicate used.
        include_derived (bool): Also quantize derived predicates.

    Raises:
        MissingCodebook: A non-Boolean predicate has no codebook.
    """
    props = []
    for name, table in state.tables.items():
        info = domain.predicates[name]
        for args, node in table.items():
            props.append((name, args, quantize_value(info, node, codebooks)))
    if include_derived:
        with ad.no_grad():
            for name, table in evaluate_derived(domain, state).items():
                info = domain.predicates[name]
                for args, node in table.items():
                    props.append((name, args, quantize_value(info, node, codebooks)))
    return DiscreteState(props)


# ------------------------------------------------------------------------------
# RULE FORMULAS
# ------------------------------------------------------------------------------

def is_variable(term):
    return term.startswith("?") or term.startswith("_")


def _atom_text(pred, args, value, types=None):
    if value == OPT:
        name = f"{pred}-opt"
    else:
        name = pred if value is True else f"{pred}@{value}"
    terms = [f"{a} - {types[a]}" if types and a in types else a for a in args]
    return f"({' '.join([name, *terms])})"


@dataclass(frozen=True)
class Lit:
    predicate: str
    args: tuple
    value: object = True
    negated: bool = False

    def to_text(self, types=None):
        if self.value is False:
            atom = _atom_text(self.predicate, self.args, True, types)
            return atom if self.negated else f"(not {atom})"
        atom = _atom_text(self.predicate, self.args, self.value, types)
        return f"(not {atom})" if self.negated else atom


@dataclass(frozen=True)
class AndF:
    items: tuple = ()

    def to_text(self, types=None):
        return "(and " + " ".join(i.to_text(types) for i in self.items) + ")"


@dataclass(frozen=True)
class OrF:
    items: tuple = ()

    def to_text(self, types=None):
        return "(or " + " ".join(i.to_text(types) for i in self.items) + ")"


@dataclass(frozen=True)
class ExistsF:
    variable: str
    type: str
    body: object

    def to_text(self, types=None):
        return f"(exists ({self.variable} - {self.type}) {self.body.to_text()})"


@dataclass(frozen=True)
class ForallF:
    variable: str
    type: str
    body: object

    def to_text(self, types=None):
        return f"(forall ({self.variable} - {self.type}) {self.body.to_text()})"


TRUE_F = AndF(())
FALSE_F = OrF(())


def negate(f):
    """Negation normal form of `not f`."""
    if isinstance(f, Lit):
        return Lit(f.predicate, f.args, f.value, not f.negated)
    if isinstance(f, AndF):
        return OrF(tuple(negate(i) for i in f.items))
    if isinstance(f, OrF):
        return AndF(tuple(negate(i) for i in f.items))
    if isinstance(f, ExistsF):
        return ForallF(f.variable, f.type, negate(f.body))
    if isinstance(f, ForallF):
        return ExistsF(f.variable, f.type, negate(f.body))
    if hasattr(f, "negated_form"):
        return f.negated_form()
    raise PDSketchError(f"cannot negate {f!r}")


def formula_to_json(f):
    if isinstance(f, Lit):
        return ["lit", f.predicate, list(f.args), f.value, f.negated]
    if isinstance(f, (AndF, OrF)):
        return ["and" if isinstance(f, AndF) else "or", [formula_to_json(i) for i in f.items]]
    if isinstance(f, (ExistsF, ForallF)):
        return ["exists" if isinstance(f, ExistsF) else "forall", f.variable, f.type, formula_to_json(f.body)]
    raise PDSketchError(f"cannot serialize {f!r}")


def formula_from_json(data):
    kind = data[0]
    if kind == "lit":
        return Lit(data[1], tuple(data[2]), data[3], bool(data[4]))
    if kind in ("and", "or"):
        items = tuple(formula_from_json(i) for i in data[1])
        return AndF(items) if kind == "and" else OrF(items)
    if kind in ("exists", "forall"):
        cls = ExistsF if kind == "exists" else ForallF
        return cls(data[1], data[2], formula_from_json(data[3]))
    raise PDSketchError(f"unknown formula kind {kind!r}")


class FormulaEvaluator:
    """
    Evaluate rule formulas over anything exposing `values_of(pred, args)`.

    Subclasses handle extra formula kinds by overriding `other`.
    """

    def __init__(self, state, universe):
        self.state = state
        self.universe = universe

    def ground(self, args, binding):
        return tuple(binding[a] if is_variable(a) else a for a in args)

    def lit(self, f, binding):
        values = self.state.values_of(f.predicate, self.ground(f.args, binding))
        if OPT in values:
            return True
        if f.negated:
            return any(v != f.value or type(v) is not type(f.value) for v in values)
        return any(v == f.value and type(v) is type(f.value) for v in values)

    def holds(self, f, binding=None):
        binding = binding or {}
        if isinstance(f, Lit):
            return self.lit(f, binding)
        if isinstance(f, AndF):
            return all(self.holds(i, binding) for i in f.items)
        if isinstance(f, OrF):
            return any(self.holds(i, binding) for i in f.items)
        if isinstance(f, ExistsF):
            return any(self.holds(f.body, {**binding, f.variable: o}) for o in self.universe.of_type(f.type))
        if isinstance(f, ForallF):
            return all(self.holds(f.body, {**binding, f.variable: o}) for o in self.universe.of_type(f.type))
        return self.other(f, binding)

    def other(self, f, binding):
        raise PDSketchError(f"cannot evaluate {f!r}")


# ------------------------------------------------------------------------------
# RULES
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class FirstOrderRule:
    """
    Learned rule set for one target.

    For Boolean targets `cases` holds (True, body) and optionally
    (False, body). For SAS targets it holds one (code, body) pair per
    produced code.

    Attributes:
        key (str): Target id, e.g. "derived::is-red" or "action::forward::0".
        predicate (str): Head predicate.
        head_args (tuple[str]): Head terms.
        variables (tuple[tuple[str, str]]): Every rule variable with its type.
        cases (tuple[tuple[object, formula]]): value <- body.
        is_bool (bool): Boolean head.
    """

    key: str
    predicate: str
    head_args: tuple
    variables: tuple
    cases: tuple
    is_bool: bool = False

    @property
    def types(self):
        return dict(self.variables)

    def body_for(self, value):
        for v, body in self.cases:
            if v == value and type(v) is type(value):
                return body
        return FALSE_F

    def predict(self, evaluator, binding):
        """Value produced on an exact discrete state (first matching case), or None."""
        for value, body in self.cases:
            if evaluator.holds(body, binding):
                return value
        return False if self.is_bool else None

    def to_text(self):
        types = self.types
        head = _atom_text(self.predicate, self.head_args, True, types)
        if self.is_bool:
            return f"{head} = {self.body_for(True).to_text()}"
        lines = [f"({head} <- (SAS"]
        for value, body in self.cases:
            lines.append(f"  {value} <- {body.to_text()}")
        lines[-1] += "))"
        return "\n".join(lines)

    def to_json(self):
        return {
            "key": self.key,
            "predicate": self.predicate,
            "head_args": list(self.head_args),
            "variables": [list(v) for v in self.variables],
            "cases": [[v, formula_to_json(b)] for v, b in self.cases],
            "is_bool": self.is_bool,
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            data["key"],
            data["predicate"],
            tuple(data["head_args"]),
            tuple(tuple(v) for v in data["variables"]),
            tuple((v, formula_from_json(b)) for v, b in data["cases"]),
            bool(data.get("is_bool", False)),
        )
