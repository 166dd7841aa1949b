"""
Neural implementations of PDSketch slots, object encoders, and the binary
parameter file format.

Every canonical slot gets one `SlotModule`, shared by all groundings of its
definition site. Modules are small MLPs:

- Fixed inputs are concatenated and fed to an MLP.
- Variadic inputs (a `foreach`, optionally with `when` conditions) go through
  a per-element MLP; element outputs are weighted by their condition score
  and sum-pooled, then a head MLP produces the output. An empty set pools to
  the zero vector.
- Zero-input slots (`(??f)`) are a learned constant.
- Boolean outputs pass through a sigmoid; vector outputs are linear.

Parameter files: magic b"PDSK", u32 format version, u32 tensor count, then per
tensor: u32 name length, UTF-8 name, u32 rank, u32 dims, float32 payload. All
little-endian.
"""

import fnmatch
import json
import logging
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .conf import default_seed, get_section
from .domain_model import bind_slot
from .exceptions import ConfigError, FormatVersionMismatch, MissingSlot, ParamIOError, ShapeMismatch

logger = logging.getLogger(__name__)

MAGIC = b"PDSK"
FORMAT_VERSION = 1


# ------------------------------------------------------------------------------
# ARCHITECTURE CONFIG
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class ArchConfig:
    """
    Slot architecture settings.

    Attributes:
        hidden (tuple[int]): Default hidden widths.
        nonlinearity (str): "relu" or "tanh".
        encoder (str): "identity" or "mlp".
        patterns (tuple): (fnmatch pattern, hidden widths) overrides, first match wins.
        dims (dict): Dimensions for vector types declared without one.
    """

    hidden: tuple = (64, 64)
    nonlinearity: str = "relu"
    encoder: str = "identity"
    patterns: tuple = ()
    dims: dict = field(default_factory=dict)

    def hidden_for(self, name):
        for pattern, widths in self.patterns:
            if fnmatch.fnmatchcase(name, pattern):
                return tuple(widths)
        return tuple(self.hidden)

    def to_json(self):
        return {
            "hidden": list(self.hidden),
            "nonlinearity": self.nonlinearity,
            "encoder": self.encoder,
            "patterns": [[p, list(w)] for p, w in self.patterns],
            "dims": dict(self.dims),
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            hidden=tuple(data.get("hidden", (64, 64))),
            nonlinearity=data.get("nonlinearity", "relu"),
            encoder=data.get("encoder", "identity"),
            patterns=tuple((p, tuple(w)) for p, w in data.get("patterns", ())),
            dims=dict(data.get("dims", {})),
        )


def _widths(text, where):
    try:
        widths = tuple(int(w) for w in text.replace(" ", "").split(",") if w)
    except ValueError:
        raise ConfigError(f"{where}: layer widths must be integers, got {text!r}") from None
    if any(w <= 0 for w in widths):
        raise ConfigError(f"{where}: layer widths must be positive")
    return widths


def arch_from_settings(overrides=None):
    section = get_section("ARCH", overrides)
    arch = ArchConfig(
        hidden=tuple(section["hidden"]),
        nonlinearity=section["nonlinearity"],
        encoder=section["encoder"],
    )
    _check_arch(arch)
    return arch


def _check_arch(arch):
    if arch.nonlinearity not in ("relu", "tanh"):
        raise ConfigError(f"unknown nonlinearity {arch.nonlinearity!r}")
    if arch.encoder not in ("identity", "mlp"):
        raise ConfigError(f"unknown encoder kind {arch.encoder!r}")


def load_arch_file(path, base=None):
    """
    Read a key-value architecture file.

        # comment
        hidden = 64, 64
        nonlinearity = relu
        encoder = mlp
        derived::is-* = 32
        dim.image = 11

    Any other key is an fnmatch pattern over canonical slot names.
    """
    base = base or arch_from_settings()
    values = {"hidden": base.hidden, "nonlinearity": base.nonlinearity, "encoder": base.encoder}
    patterns = list(base.patterns)
    dims = dict(base.dims)
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read architecture file {path}: {exc}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        where = f"{path}:{n}"
        if key == "hidden":
            values["hidden"] = _widths(value, where)
        elif key in ("nonlinearity", "encoder"):
            values[key] = value
        elif key.startswith("dim."):
            try:
                dims[key[4:]] = int(value)
            except ValueError:
                raise ConfigError(f"{where}: dimension must be an integer") from None
        else:
            patterns.append((key, _widths(value, where)))
    arch = ArchConfig(values["hidden"], values["nonlinearity"], values["encoder"], tuple(patterns), dims)
    _check_arch(arch)
    return arch


# ------------------------------------------------------------------------------
# LAYERS
# ------------------------------------------------------------------------------

def _init_values(name, shape, fan_in, seed):
    rng = np.random.default_rng([int(seed), zlib.crc32(name.encode("utf-8"))])
    limit = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-limit, limit, size=shape)


class MLP:
    """Dense layers with a shared nonlinearity; the last layer is linear."""

    def __init__(self, store, prefix, sizes, nonlinearity, seed):
        self.sizes = tuple(sizes)
        self.nonlinearity = nonlinearity
        self.layers = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            w_name, b_name = f"{prefix}/l{i}/W", f"{prefix}/l{i}/b"
            w = store.get_or_create(w_name, lambda: _init_values(w_name, (fan_out, fan_in), fan_in, seed))
            b = store.get_or_create(b_name, lambda: np.zeros(fan_out))
            self.layers.append((w, b))

    def __call__(self, x):
        act = ad.relu if self.nonlinearity == "relu" else ad.tanh
        last = len(self.layers) - 1
        for i, (w, b) in enumerate(self.layers):
            x = ad.add(ad.matvec(w.node(), x), b.node())
            if i < last:
                x = act(x)
        return x


def _resolve_dim(vtype, arch, where):
    if vtype.size is not None:
        return vtype.size
    for key in (vtype.name, vtype.to_text()):
        if key and key in arch.dims:
            return int(arch.dims[key])
    raise ConfigError(f"{where}: vector type {vtype.to_text()} has no dimension; set dim.{vtype.name or 'TYPE'}")


def _squash(out, vtype):
    if vtype.kind == "vector":
        return out
    scalar = ad.index(out, 0)
    return ad.sigmoid(scalar) if vtype.is_bool else scalar


# ------------------------------------------------------------------------------
# SLOT MODULES
# ------------------------------------------------------------------------------

class SlotModule:
    """
    Neural implementation of one canonical slot.

    Called with one argument per signature input: a DiffNode for fixed
    inputs, a list of (condition DiffNode | None, value DiffNode) pairs for
    variadic inputs.
    """

    def __init__(self, signature, store, arch, seed):
        self.name = signature.name
        self.signature = signature
        self.input_dims = tuple(_resolve_dim(i.type, arch, self.name) for i in signature.inputs)
        self.output_dim = _resolve_dim(signature.output, arch, self.name)
        self.fixed = [k for k, i in enumerate(signature.inputs) if not i.variadic]
        self.variadic = [k for k, i in enumerate(signature.inputs) if i.variadic]
        hidden = arch.hidden_for(self.name)
        fixed_dim = sum(self.input_dims[k] for k in self.fixed)

        self.constant = None
        self.elements = {}
        if not signature.inputs:
            name = f"{self.name}/const"
            self.constant = store.get_or_create(
                name, lambda: _init_values(name, (self.output_dim,), self.output_dim, seed) * 0.1
            )
            self.head = None
        elif not self.variadic:
            self.head = MLP(store, f"{self.name}/mlp", (fixed_dim, *hidden, self.output_dim), arch.nonlinearity, seed)
        else:
            self.pool_dim = hidden[-1] if hidden else self.output_dim
            for k in self.variadic:
                self.elements[k] = MLP(
                    store,
                    f"{self.name}/elem{k}",
                    (fixed_dim + self.input_dims[k], *hidden, self.pool_dim),
                    arch.nonlinearity,
                    seed,
                )
            head_in = fixed_dim + self.pool_dim * len(self.variadic)
            self.head = MLP(store, f"{self.name}/head", (head_in, *hidden, self.output_dim), arch.nonlinearity, seed)

    def __repr__(self):
        return f"<SlotModule {self.name} {self.signature.describe()}>"

    def _check(self, k, node):
        want = self.input_dims[k]
        got = int(node.value.size)
        if got != want:
            raise ShapeMismatch(f"slot {self.name}: input {k} has size {got}, expected {want}")

    def __call__(self, args):
        if len(args) != len(self.input_dims):
            raise ShapeMismatch(f"slot {self.name}: expected {len(self.input_dims)} inputs, got {len(args)}")
        if self.constant is not None:
            return _squash(self.constant.node(), self.signature.output)

        for k in self.fixed:
            self._check(k, args[k])
        fixed = [args[k] for k in self.fixed]
        if not self.variadic:
            return _squash(self.head(ad.concat(*fixed)), self.signature.output)

        pooled = []
        for k in self.variadic:
            items = list(args[k])
            for _, value in items:
                self._check(k, value)
            # canonical order makes the pooled sum independent of input order
            items.sort(key=lambda cv: (tuple(np.atleast_1d(cv[1].value)), -1.0 if cv[0] is None else cv[0].item()))
            terms = []
            for cond, value in items:
                h = self.elements[k](ad.concat(*fixed, value))
                terms.append(h if cond is None else ad.mul(cond, h))
            pooled.append(ad.add(*terms) if terms else ad.constant(np.zeros(self.pool_dim)))
        return _squash(self.head(ad.concat(*fixed, *pooled)), self.signature.output)


class FunctionSlot:
    """
    Bind a plain Python function as a slot (e.g. ground-truth oracles).

    `fn` receives numpy arrays for fixed inputs and lists of
    (condition float, array) pairs for variadic ones, and returns a number
    or an array. The result is a constant: no gradient flows through it.
    """

    def __init__(self, fn, input_dims, output_dim, is_bool=False, name=None):
        self.fn = fn
        self.input_dims = tuple(input_dims)
        self.output_dim = output_dim
        self.is_bool = is_bool
        self.name = name or getattr(fn, "__name__", "function")

    def __repr__(self):
        return f"<FunctionSlot {self.name}>"

    def __call__(self, args):
        plain = []
        for a in args:
            if isinstance(a, ad.DiffNode):
                plain.append(a.numpy())
            else:
                plain.append([(1.0 if c is None else c.item(), v.numpy()) for c, v in a])
        out = np.asarray(self.fn(*plain), dtype=np.float64)
        if self.is_bool:
            return ad.constant(float(np.clip(out.reshape(-1)[0], 0.0, 1.0)))
        if out.ndim == 0:
            return ad.constant(float(out))
        return ad.constant(out.reshape(-1))


# ------------------------------------------------------------------------------
# ENCODERS
# ------------------------------------------------------------------------------

class Encoder:
    """
    Maps raw per-object observations to latent input-predicate values.

    "identity" passes observations through; "mlp" applies one MLP per
    (object type, predicate), named "encoder::<type>::<predicate>".
    """

    def __init__(self, domain, store, arch, seed):
        self.kind = arch.encoder
        self.modules = {}
        if self.kind != "mlp":
            return
        for info in domain.input_predicates:
            if info.return_type.kind != "vector" or info.arity != 1:
                continue
            dim = _resolve_dim(info.return_type, arch, info.name)
            type_name = info.parameters[0].type
            prefix = f"encoder::{type_name}::{info.name}"
            self.modules[info.name] = MLP(store, prefix, (dim, *arch.hidden_for(prefix), dim), arch.nonlinearity, seed)

    def encode(self, predicate, value):
        node = value if isinstance(value, ad.DiffNode) else ad.constant(value)
        module = self.modules.get(predicate)
        return module(node) if module is not None else node


# ------------------------------------------------------------------------------
# INSTANTIATION
# ------------------------------------------------------------------------------

class SlotParams(ad.ParamStore):
    """ParamStore that also remembers the modules, encoder and architecture built on it."""

    def __init__(self):
        super().__init__()
        self.modules = {}
        self.encoder = None
        self.arch = None


def instantiate(domain, arch=None, seed=None, store=None):
    """
    Create and bind a SlotModule for every slot of `domain`.

    Args:
        domain (Domain): Validated domain; its slots are (re)bound.
        arch (ArchConfig, optional): Defaults to settings.PDSKETCH["ARCH"].
        seed (int, optional): Init seed; defaults to settings.PDSKETCH["SEED"].
        store (ParamStore, optional): Existing store to add tensors to.

    Returns:
        ParamStore: Holds every slot and encoder tensor. The encoder is
            available as `store.encoder`.

    Raises:
        ConfigError: A vector type without a dimension and no `dim.` entry.
    """
    arch = arch or arch_from_settings()
    seed = default_seed() if seed is None else seed
    store = store if store is not None else SlotParams()
    modules = {}
    for name in sorted(domain.slots):
        module = SlotModule(domain.slots[name], store, arch, seed)
        bind_slot(domain, name, module)
        modules[name] = module
    store.modules = modules
    store.encoder = Encoder(domain, store, arch, seed)
    store.arch = arch
    logger.info("instantiated %d slot modules (%d tensors) for %s", len(modules), len(store), domain.name)
    return store


# ------------------------------------------------------------------------------
# PERSISTENCE
# ------------------------------------------------------------------------------

def save(store, path):
    """Write all tensors of `store` to `path` atomically."""
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(store))]
    for t in store:
        name = t.name.encode("utf-8")
        values = np.ascontiguousarray(t.values, dtype="<f4")
        chunks.append(struct.pack("<I", len(name)))
        chunks.append(name)
        chunks.append(struct.pack("<I", values.ndim))
        chunks.append(struct.pack(f"<{values.ndim}I", *values.shape))
        chunks.append(values.tobytes())
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        with os.fdopen(fd, "wb") as fh:
            fh.write(b"".join(chunks))
        os.replace(tmp, path)
    except OSError as exc:
        raise ParamIOError(f"cannot write parameters to {path}: {exc}") from exc
    logger.info("saved %d tensors to %s", len(store), path)


def _read(buf, offset, fmt):
    size = struct.calcsize(fmt)
    if offset + size > len(buf):
        raise FormatVersionMismatch("parameter file is truncated")
    return struct.unpack_from(fmt, buf, offset), offset + size


def load(path):
    """
    Read a parameter file into a fresh ParamStore (all-or-nothing).

    Raises:
        ParamIOError: Unreadable file.
        FormatVersionMismatch: Bad magic, unknown version, or truncation.
    """
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise ParamIOError(f"cannot read parameters from {path}: {exc}") from exc
    if buf[:4] != MAGIC:
        raise FormatVersionMismatch(f"{path} is not a PDSketch parameter file")
    (version, count), offset = _read(buf, 4, "<II")
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")

    tensors = []
    for _ in range(count):
        (name_len,), offset = _read(buf, offset, "<I")
        if offset + name_len > len(buf):
            raise FormatVersionMismatch("parameter file is truncated")
        name = buf[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (rank,), offset = _read(buf, offset, "<I")
        shape, offset = _read(buf, offset, f"<{rank}I")
        n = int(np.prod(shape)) if rank else 1
        if offset + 4 * n > len(buf):
            raise FormatVersionMismatch("parameter file is truncated")
        values = np.frombuffer(buf, dtype="<f4", count=n, offset=offset).reshape(shape)
        offset += 4 * n
        tensors.append((name, values.astype(np.float32)))
    if offset != len(buf):
        raise FormatVersionMismatch(f"{path}: {len(buf) - offset} trailing bytes")

    store = ad.ParamStore()
    for name, values in tensors:
        store.create(name, values)
    return store


def load_into(domain, path, arch=None):
    """
    Instantiate modules for `domain` and fill them from a parameter file.

    Raises:
        MissingSlot: The file and the domain disagree on tensor names.
        ParamIOError: A tensor has the wrong shape.
    """
    raw = load(path)
    store = instantiate(domain, arch, seed=0)
    expected, found = set(store.names()), set(raw.names())
    if expected != found:
        missing = sorted(expected - found)
        extra = sorted(found - expected)
        parts = []
        if missing:
            parts.append(f"missing {', '.join(missing)}")
        if extra:
            parts.append(f"unmatched {', '.join(extra)}")
        raise MissingSlot(f"{path} does not match domain {domain.name}: {'; '.join(parts)}")
    for t in store:
        try:
            t.assign(raw[t.name].values)
        except ShapeMismatch as exc:
            raise ParamIOError(str(exc)) from exc
    return store


def arch_path_for(params_path):
    """Architecture companion written next to a parameter file."""
    return Path(f"{params_path}.arch.json")


def save_arch(arch, params_path):
    path = arch_path_for(params_path)
    try:
        path.write_text(json.dumps(arch.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ParamIOError(f"cannot write {path}: {exc}") from exc
    return path


def arch_for(params_path, arch_file=None):
    """
    Architecture of a parameter file: an explicit key-value file wins, then
    the JSON companion, then settings.
    """
    if arch_file:
        return load_arch_file(arch_file)
    companion = arch_path_for(params_path)
    if companion.is_file():
        try:
            return ArchConfig.from_json(json.loads(companion.read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise ParamIOError(f"cannot read {companion}: {exc}") from exc
    return arch_from_settings()
