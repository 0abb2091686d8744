"""Changes, weights, weighted majority quorums and register tags.

Everything here is a pure value or a pure function. Weights are exact
``Fraction`` values so that thresholds such as ``(n-1)/(2f)`` compare exactly.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Iterable, NamedTuple, Optional, Sequence, Union

Weight = Fraction
WeightLike = Union[Fraction, int, str]


class ConfigError(ValueError):
    """Raised for configurations or scenarios that cannot be run."""


class ProcessId(NamedTuple):
    """A server or client identity.

    Indices are zero based; the textual form is one based (``s1`` is server
    index 0) to line up with the usual ``s1 .. sn`` naming. Ordering is by kind,
    then index, and is the tie-breaker for register tags.
    """

    kind: str
    index: int

    def __str__(self) -> str:
        if self.kind == "":
            return "_"
        return f"{self.kind[0]}{self.index + 1}"

    @property
    def is_server(self) -> bool:
        return self.kind == "server"

    @classmethod
    def parse(cls, text: str) -> "ProcessId":
        text = text.strip()
        if text == "_":
            return BOTTOM_PID
        if len(text) < 2 or text[0] not in "sc" or not text[1:].isdigit():
            raise ConfigError(f"bad process id {text!r} (expected s<k> or c<k>, k >= 1)")
        k = int(text[1:])
        if k < 1:
            raise ConfigError(f"bad process id {text!r}: numbering starts at 1")
        return cls("server" if text[0] == "s" else "client", k - 1)


# Compares below every real process id ("" < "client" < "server").
BOTTOM_PID = ProcessId("", -1)


def server(k: int) -> ProcessId:
    """Server with zero-based index ``k``."""
    return ProcessId("server", k)


def client(k: int) -> ProcessId:
    return ProcessId("client", k)


def as_weight(x: WeightLike) -> Fraction:
    """Exact conversion; strings may be ``"3/4"`` or decimals like ``"0.7"``."""
    if isinstance(x, float):
        raise TypeError("floats are not accepted as weights; use Fraction or a string")
    return Fraction(x)


class Change(NamedTuple):
    """Outcome of one reassignment: ``target``'s weight moves by ``delta``."""

    issuer: ProcessId
    counter: int
    target: ProcessId
    delta: Fraction

    @property
    def key(self) -> tuple[ProcessId, int]:
        """The operation this change belongs to (issuer, local counter)."""
        return (self.issuer, self.counter)

    def __str__(self) -> str:
        return f"<{self.issuer},{self.counter},{self.target},{self.delta}>"


ChangeSet = frozenset
EMPTY: frozenset = frozenset()


class Tag(NamedTuple):
    """Register tag; the tuple order is exactly timestamp then writer id."""

    ts: int
    pid: ProcessId


BOTTOM_TAG = Tag(0, BOTTOM_PID)


class RegisterCell(NamedTuple):
    tag: Tag
    val: Optional[str]


EMPTY_CELL = RegisterCell(BOTTOM_TAG, None)


def tag_less(a: Tag, b: Tag) -> bool:
    return a.ts < b.ts or (a.ts == b.ts and a.pid < b.pid)


class SystemConfig:
    """``n`` servers, at most ``f`` crashes, per-server initial weights.

    The initial weights must already satisfy the availability property.
    """

    def __init__(self, n: int, f: int, initial_weights: Optional[Sequence[WeightLike]] = None):
        if n < 1:
            raise ConfigError(f"need at least one server (n={n})")
        if f < 0:
            raise ConfigError(f"fault threshold must be non-negative (f={f})")
        if initial_weights is None:
            weights = (Fraction(1),) * n
        else:
            weights = tuple(as_weight(w) for w in initial_weights)
        if len(weights) != n:
            raise ConfigError(f"expected {n} initial weights, got {len(weights)}")
        if any(w <= 0 for w in weights):
            raise ConfigError("initial weights must be positive")
        self.n = n
        self.f = f
        self.initial_weights = weights
        self.servers = tuple(server(i) for i in range(n))
        self.initial_changes: frozenset = frozenset(
            Change(s, 1, s, w) for s, w in zip(self.servers, weights)
        )
        if f >= n:
            raise ConfigError(f"availability violated: f={f} must be smaller than n={n}")
        if not check_availability(self.initial_changes, self):
            raise ConfigError(
                "availability violated: the f greatest initial weights reach half "
                f"of the total weight (weights={[str(w) for w in weights]}, f={f})"
            )

    @property
    def total_weight(self) -> Fraction:
        return sum(self.initial_weights, Fraction(0))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, SystemConfig)
            and (self.n, self.f, self.initial_weights) == (other.n, other.f, other.initial_weights)
        )

    def __hash__(self) -> int:
        return hash((self.n, self.f, self.initial_weights))

    def __repr__(self) -> str:
        ws = ", ".join(str(w) for w in self.initial_weights)
        return f"SystemConfig(n={self.n}, f={self.f}, weights=[{ws}])"


def weight_of(cs: Iterable[Change], s: ProcessId) -> Fraction:
    return sum((c.delta for c in cs if c.target == s), Fraction(0))


@lru_cache(maxsize=8192)
def weight_map(cs: frozenset) -> dict:
    """Server -> summed delta; cached because views repeat constantly."""
    out: dict = {}
    for c in cs:
        out[c.target] = out.get(c.target, 0) + c.delta
    return out


def weights(cs: frozenset, servers: Iterable[ProcessId]) -> list[Fraction]:
    """Weight of every server in ``servers`` (in order) under ``cs``."""
    m = weight_map(frozenset(cs))
    return [Fraction(m.get(s, 0)) for s in servers]


def total_weight(cs: frozenset, servers: Iterable[ProcessId]) -> Fraction:
    return sum(weights(cs, servers), Fraction(0))


def _available(ws: Sequence[Fraction], f: int) -> bool:
    if f == 0:
        return True
    top = sorted(ws, reverse=True)[:f]
    return 2 * sum(top, Fraction(0)) < sum(ws, Fraction(0))


def check_availability(cs: frozenset, cfg: SystemConfig) -> bool:
    """True iff the ``f`` largest server weights sum to less than half the total."""
    return _available(weights(cs, cfg.servers), cfg.f)


def min_weight_threshold(cfg: SystemConfig) -> Fraction:
    """Lower bound every server weight must stay strictly above."""
    if cfg.n <= cfg.f:
        raise ConfigError(f"threshold undefined for n={cfg.n} <= f={cfg.f}")
    return cfg.total_weight / (2 * (cfg.n - cfg.f))


def is_quorum(cs: frozenset, q: Iterable[ProcessId], cfg: SystemConfig) -> bool:
    m = weight_map(frozenset(cs))
    return 2 * sum((m.get(s, 0) for s in set(q)), Fraction(0)) > cfg.total_weight


def merge(a: frozenset, b: frozenset) -> frozenset:
    if a is b or not b:
        return a
    if not a:
        return b
    return a | b


def changes_for(cs: Iterable[Change], s: ProcessId) -> frozenset:
    return frozenset(c for c in cs if c.target == s)


def group_complete(changes: Iterable[Change]) -> bool:
    """Whether the changes of one operation key form a whole outcome.

    Initial weights are a single self-change with counter 1; an effective
    transfer is a debit on the issuer plus a credit on another server.
    """
    cs = list(changes)
    if len(cs) == 1:
        c = cs[0]
        return c.counter == 1 and c.issuer == c.target
    if len(cs) == 2:
        debit = [c for c in cs if c.target == c.issuer and c.delta < 0]
        credit = [c for c in cs if c.target != c.issuer and c.delta > 0]
        return len(debit) == 1 and len(credit) == 1 and debit[0].delta == -credit[0].delta
    return False


def quorums(ws: Sequence[Fraction], total: Fraction) -> list[int]:
    """Bitmasks of every server subset whose weight exceeds ``total / 2``."""
    n = len(ws)
    out = []
    for mask in range(1, 1 << n):
        w = sum((ws[i] for i in range(n) if mask >> i & 1), Fraction(0))
        if 2 * w > total:
            out.append(mask)
    return out


def smallest_quorum_size(ws: Sequence[Fraction], total: Fraction, among: Optional[Sequence[int]] = None) -> Optional[int]:
    """Size of the smallest quorum drawn from the server indices ``among``."""
    idx = list(range(len(ws))) if among is None else list(among)
    for k in range(1, len(idx) + 1):
        for combo in combinations(idx, k):
            if 2 * sum((ws[i] for i in combo), Fraction(0)) > total:
                return k
    return None
