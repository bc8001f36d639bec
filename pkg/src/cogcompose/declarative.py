"""Long-term declarative memories: episodic (Kanerva SDM) and semantic (Slipnet).

Episodic memory comes in three independent instances (user, service-provider,
network) sharing one premise codec. Semantic memory is an activation-passing
concept network whose link lengths encode conceptual distance.
"""
from __future__ import annotations

import hashlib
import io
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .domain import Premise
from .errors import LengthMismatch

EPISODIC_KINDS = ("user", "service-provider", "network")

SNAPSHOT_MAGIC = b"CGDM"
SNAPSHOT_VERSION = 1


def radius_for(address_length: int, hard_locations: int, fraction: float) -> int:
    """Smallest Hamming radius whose expected activation covers ``fraction`` of locations."""
    total = 2 ** address_length
    cum = 0
    for r in range(address_length + 1):
        cum += math.comb(address_length, r)
        if cum / total >= fraction:
            return r
    return address_length


def _as_bits(vector, n: int) -> np.ndarray:
    v = np.asarray(vector, dtype=np.uint8).ravel()
    if v.shape[0] != n:
        raise LengthMismatch(f"expected {n} bits, got {v.shape[0]}")
    return v


class SparseDistributedMemory:
    """Kanerva memory with saturating counters and Hamming-radius activation.

    When no hard location lies inside the radius the single nearest location
    is used, so every address has somewhere to write to and read from.
    """

    def __init__(self, address_length: int = 256, hard_locations: int = 1000,
                 radius: int | None = None, activation_fraction: float = 0.01,
                 counter_limit: int = 127, kind: str = "user",
                 rng: np.random.Generator | None = None,
                 addresses: np.ndarray | None = None):
        self.n = address_length
        self.kind = kind
        self.counter_limit = counter_limit
        if addresses is None:
            rng = rng if rng is not None else np.random.default_rng(0)
            addresses = rng.integers(0, 2, size=(hard_locations, address_length), dtype=np.uint8)
        addresses = np.asarray(addresses, dtype=np.uint8)
        if addresses.ndim != 2 or addresses.shape[1] != address_length:
            raise LengthMismatch("hard-location addresses must be H x n")
        self.H = addresses.shape[0]
        self.addresses = addresses
        self._packed = np.packbits(addresses, axis=1)
        self.radius = radius if radius is not None else radius_for(address_length, self.H,
                                                                   activation_fraction)
        self.counters: np.ndarray | None = None
        self.written = np.zeros(self.H, dtype=bool)
        self.writes = 0
        self.touched = 0

    def distances(self, address) -> np.ndarray:
        bits = _as_bits(address, self.n)
        x = np.bitwise_xor(self._packed, np.packbits(bits))
        return np.bitwise_count(x).sum(axis=1, dtype=np.int32)

    def activated(self, address) -> np.ndarray:
        d = self.distances(address)
        idx = np.flatnonzero(d <= self.radius)
        if idx.size == 0:
            idx = np.array([int(np.argmin(d))])
        self.touched += idx.size
        return idx

    def write(self, address, data) -> None:
        data = _as_bits(data, self.n)
        idx = self.activated(address)
        if self.counters is None:
            self.counters = np.zeros((self.H, self.n), dtype=np.int16)
        delta = np.where(data > 0, 1, -1).astype(np.int16)
        block = self.counters[idx] + delta
        np.clip(block, -self.counter_limit, self.counter_limit, out=block)
        self.counters[idx] = block
        self.written[idx] = True
        self.writes += 1

    def store(self, vector) -> None:
        """Autoassociative write: the vector is its own address."""
        self.write(vector, vector)

    def read(self, address) -> tuple[np.ndarray, float, float]:
        """Majority readout: ``(bits, tie fraction, written fraction of activated locations)``."""
        idx = self.activated(address)
        if self.counters is None:
            return np.zeros(self.n, dtype=np.uint8), 1.0, 0.0
        sums = self.counters[idx].sum(axis=0, dtype=np.int32)
        bits = (sums > 0).astype(np.uint8)
        return bits, float(np.mean(sums == 0)), float(self.written[idx].mean())

    def retrieve(self, cue, max_iterations: int = 10, tie_limit: float = 0.25) -> np.ndarray | None:
        """Iterated readout from ``cue``; ``None`` when too many bits tie."""
        x = _as_bits(cue, self.n).copy()
        for _ in range(max_iterations):
            idx = self.activated(x)
            if self.counters is None:
                return None
            sums = self.counters[idx].sum(axis=0, dtype=np.int32)
            ties = sums == 0
            if ties.mean() > tie_limit:
                return None
            nxt = np.where(ties, x, (sums > 0).astype(np.uint8))
            if np.array_equal(nxt, x):
                break
            x = nxt
        return x


class PremiseCodec:
    """Deterministic premise <-> bit-vector codebook.

    Each premise maps to a pseudo-random code seeded by the scenario seed and a
    stable digest of the premise text.
    """

    def __init__(self, address_length: int = 256, seed: int = 0):
        self.n = address_length
        self.seed = seed
        self.codebook: dict[Premise, np.ndarray] = {}
        self._matrix: np.ndarray | None = None
        self._keys: list[Premise] = []

    def encode(self, premise: Premise) -> np.ndarray:
        code = self.codebook.get(premise)
        if code is None:
            digest = int.from_bytes(hashlib.blake2b(str(premise).encode(), digest_size=8).digest(), "little")
            rng = np.random.default_rng([self.seed, digest])
            code = rng.integers(0, 2, size=self.n, dtype=np.uint8)
            self.codebook[premise] = code
            self._matrix = None
        return code

    def decode(self, vector, max_distance: float = 0.2) -> Premise | None:
        """Nearest known premise within ``max_distance * n`` bits, else ``None``."""
        if not self.codebook:
            return None
        bits = _as_bits(vector, self.n)
        if self._matrix is None:
            self._keys = sorted(self.codebook)
            self._matrix = np.stack([self.codebook[k] for k in self._keys])
        d = np.count_nonzero(self._matrix != bits, axis=1)
        best = int(np.argmin(d))
        return self._keys[best] if d[best] <= max_distance * self.n else None


@dataclass
class SlipnetLink:
    a: str
    b: str
    relation: str
    length: float

    def __post_init__(self):
        if not 0 < self.length <= 1:
            raise ValueError("conceptual length must lie in (0, 1]")


class Slipnet:
    """Semantic network: ``B_i <- B_i + sum over active neighbours of (k - L_ij)``.

    ``k`` defaults to 6 so that, with 0.9 decay, a concept one link away from
    a clamped node can cross the 50-unit threshold (steady state is
    ``10 * (k - L)``); longer links take longer and ``L = 1`` never does.
    """

    def __init__(self, k: float = 6.0, ceiling: float = 100.0, threshold: float = 50.0,
                 decay: float = 0.9, shrink: float = 0.05, min_length: float = 0.05):
        self.k = k
        self.ceiling = ceiling
        self.threshold = threshold
        self.decay_factor = decay
        self.shrink = shrink
        self.min_length = min_length
        self.nodes: dict[str, float] = {}
        self.links: list[SlipnetLink] = []
        self.clamped: set[str] = set()
        self._adj: dict[str, list[tuple[str, SlipnetLink]]] = {}

    def add_node(self, name: str, activation: float = 0.0) -> None:
        self.nodes.setdefault(name, float(activation))
        self._adj.setdefault(name, [])

    def add_link(self, a: str, b: str, relation: str = "related-to", length: float = 0.5) -> SlipnetLink:
        self.add_node(a)
        self.add_node(b)
        link = SlipnetLink(a, b, relation, float(length))
        self.links.append(link)
        self._adj[a].append((b, link))
        self._adj[b].append((a, link))
        return link

    def is_active(self, name: str) -> bool:
        return self.nodes.get(name, 0.0) > self.threshold

    def clamp(self, names: Iterable[str]) -> None:
        self.clamped = {n for n in names if n in self.nodes}
        for n in self.clamped:
            self.nodes[n] = self.ceiling

    def spread(self) -> None:
        active = {n for n, b in self.nodes.items() if b > self.threshold}
        updated = {}
        for name, b in self.nodes.items():
            inc = sum(self.k - link.length for other, link in self._adj[name] if other in active)
            updated[name] = min(max(b + inc, 0.0), self.ceiling)
        self.nodes = updated
        for n in self.clamped:
            self.nodes[n] = self.ceiling

    def decay(self) -> None:
        for n in self.nodes:
            if n not in self.clamped:
                self.nodes[n] *= self.decay_factor

    def adjust_lengths(self) -> None:
        for link in self.links:
            if self.is_active(link.a) and self.is_active(link.b):
                link.length = max(self.min_length, link.length * (1 - self.shrink))

    def relations(self) -> set[Premise]:
        return {Premise(l.a, f"{l.relation}-{l.b}") for l in self.links
                if self.is_active(l.a) and self.is_active(l.b)}

    def total_activation(self) -> float:
        return sum(self.nodes.values())


class DeclarativeMemory:
    """Cue-driven retrieval producing the declarative premise set for one cycle."""

    def __init__(self, codec: PremiseCodec | None = None, rng: np.random.Generator | None = None,
                 address_length: int = 256, hard_locations: int = 1000,
                 activation_fraction: float = 0.01, slipnet: Slipnet | None = None,
                 min_strength: float = 0.5, max_distance: float = 0.2):
        self.codec = codec or PremiseCodec(address_length)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.episodic = {
            kind: SparseDistributedMemory(address_length, hard_locations,
                                          activation_fraction=activation_fraction,
                                          kind=kind, rng=rng)
            for kind in EPISODIC_KINDS
        }
        self.slipnet = slipnet or Slipnet()
        self.min_strength = min_strength
        self.max_distance = max_distance

    def remember(self, kind: str, cue: Premise, recalled: Premise) -> None:
        """Record that ``cue`` should bring ``recalled`` back to mind."""
        self.codec.encode(recalled)
        self.episodic[kind].write(self.codec.encode(cue), self.codec.encode(recalled))

    def recall(self, kind: str, cue: Premise) -> Premise | None:
        mem = self.episodic[kind]
        if mem.writes == 0:
            return None
        bits, ties, strength = mem.read(self.codec.encode(cue))
        if ties > 0.25 or strength < self.min_strength:
            return None
        return self.codec.decode(bits, self.max_distance)

    def cue(self, new_units: Iterable[Premise], wm_premises: Iterable[Premise]) -> set[Premise]:
        found: set[Premise] = set()
        for p in new_units:
            for kind in EPISODIC_KINDS:
                got = self.recall(kind, p)
                if got is not None and got != p:
                    found.add(got)
        net = self.slipnet
        if net.nodes:
            concepts = set()
            for p in wm_premises:
                concepts.add(p.key)
                concepts.add(p.value)
            net.decay()
            net.clamp(concepts)
            net.spread()
            net.adjust_lengths()
            found |= net.relations()
        return found

    def pages_touched(self) -> int:
        """Hard locations touched since the last call (resets the counter)."""
        total = 0
        for mem in self.episodic.values():
            total += mem.touched
            mem.touched = 0
        return total

    # -- persistence -------------------------------------------------------

    def to_bytes(self) -> bytes:
        header = {
            "version": SNAPSHOT_VERSION,
            "codec_seed": self.codec.seed,
            "episodic": [
                {"kind": k, "n": m.n, "H": m.H, "radius": m.radius,
                 "counter_limit": m.counter_limit, "writes": m.writes,
                 "has_counters": m.counters is not None}
                for k, m in self.episodic.items()
            ],
            "slipnet": {
                "params": {"k": self.slipnet.k, "ceiling": self.slipnet.ceiling,
                           "threshold": self.slipnet.threshold,
                           "decay": self.slipnet.decay_factor, "shrink": self.slipnet.shrink,
                           "min_length": self.slipnet.min_length},
                "nodes": self.slipnet.nodes,
                "links": [[l.a, l.b, l.relation, l.length] for l in self.slipnet.links],
            },
            "codebook": sorted(str(p) for p in self.codec.codebook),
        }
        raw = json.dumps(header, sort_keys=True).encode()
        buf = io.BytesIO()
        buf.write(SNAPSHOT_MAGIC)
        buf.write(struct.pack("<HI", SNAPSHOT_VERSION, len(raw)))
        buf.write(raw)
        for m in self.episodic.values():
            buf.write(np.packbits(m.addresses, axis=1).tobytes())
            buf.write(np.packbits(m.written).tobytes())
            if m.counters is not None:
                buf.write(m.counters.astype("<i2").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "DeclarativeMemory":
        if data[:4] != SNAPSHOT_MAGIC:
            raise ValueError("not a declarative-memory snapshot")
        version, hlen = struct.unpack_from("<HI", data, 4)
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {version}")
        pos = 10
        header = json.loads(data[pos:pos + hlen])
        pos += hlen
        codec = PremiseCodec(header["episodic"][0]["n"], header["codec_seed"])
        for text in header["codebook"]:
            codec.encode(Premise.parse(text))
        sp = header["slipnet"]
        net = Slipnet(**sp["params"])
        for name, act in sp["nodes"].items():
            net.add_node(name, act)
        for a, b, rel, length in sp["links"]:
            net.add_link(a, b, rel, length)
        mem = cls.__new__(cls)
        mem.codec = codec
        mem.slipnet = net
        mem.min_strength = 0.5
        mem.max_distance = 0.2
        mem.episodic = {}
        for meta in header["episodic"]:
            n, H = meta["n"], meta["H"]
            row = (n + 7) // 8
            packed = np.frombuffer(data, dtype=np.uint8, count=H * row, offset=pos).reshape(H, row)
            pos += H * row
            addresses = np.unpackbits(packed, axis=1, count=n)
            wbytes = (H + 7) // 8
            written = np.unpackbits(np.frombuffer(data, dtype=np.uint8, count=wbytes, offset=pos),
                                    count=H).astype(bool)
            pos += wbytes
            sdm = SparseDistributedMemory(n, H, radius=meta["radius"],
                                          counter_limit=meta["counter_limit"],
                                          kind=meta["kind"], addresses=addresses)
            sdm.written = written
            sdm.writes = meta["writes"]
            if meta["has_counters"]:
                sdm.counters = np.frombuffer(data, dtype="<i2", count=H * n,
                                             offset=pos).reshape(H, n).astype(np.int16)
                pos += H * n * 2
            mem.episodic[meta["kind"]] = sdm
        return mem

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "DeclarativeMemory":
        return cls.from_bytes(Path(path).read_bytes())
