"""Prime-field arithmetic for probe packets.

A probe packet is a coefficient vector over F_q with one entry per source.
Coding nodes only ever add (optionally scaled) packets, and receivers only
read the coefficients back, so nothing here needs inversion or decoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import DimensionMismatch, IndexOutOfRange, MixedExperiment


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    n = max(n, 2)
    while not is_prime(n):
        n += 1
    return n


@dataclass(frozen=True)
class FieldSpec:
    q: int

    def __post_init__(self) -> None:
        if not is_prime(self.q):
            raise ValueError(f"field order must be prime, got {self.q}")

    @classmethod
    def for_joins(cls, max_joins: int) -> "FieldSpec":
        """Field large enough that path-count coefficients never wrap."""
        return cls(next_prime(max_joins + 2))


@dataclass(frozen=True)
class ProbePacket:
    coeffs: tuple[int, ...]
    experiment_id: int = 0

    def __len__(self) -> int:
        return len(self.coeffs)

    @property
    def is_zero(self) -> bool:
        return not any(self.coeffs)

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for i, c in enumerate(self.coeffs) if c)

    def label(self) -> str:
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 1:
                terms.append(f"x{i + 1}")
            elif c:
                terms.append(f"{c}x{i + 1}")
        return "+".join(terms) or "0"


def unit_probe(source_index: int, n_sources: int, spec: FieldSpec, experiment_id: int = 0) -> ProbePacket:
    if not 0 <= source_index < n_sources:
        raise IndexOutOfRange(f"source index {source_index} outside [0, {n_sources})")
    coeffs = [0] * n_sources
    coeffs[source_index] = 1 % spec.q
    return ProbePacket(tuple(coeffs), experiment_id)


def combine(packets: Sequence[ProbePacket], coefficients: Sequence[int], spec: FieldSpec) -> ProbePacket:
    """Componentwise linear combination sum(a_i * p_i) over F_q."""
    if len(packets) != len(coefficients):
        raise DimensionMismatch(f"{len(packets)} packets but {len(coefficients)} coefficients")
    if not packets:
        raise DimensionMismatch("nothing to combine")
    width = len(packets[0])
    eid = packets[0].experiment_id
    for p in packets:
        if len(p) != width:
            raise DimensionMismatch("packets have different widths")
        if p.experiment_id != eid:
            raise MixedExperiment(f"experiment ids {eid} and {p.experiment_id}")
    q = spec.q
    out = [0] * width
    for p, a in zip(packets, coefficients):
        for i, c in enumerate(p.coeffs):
            out[i] = (out[i] + a * c) % q
    return ProbePacket(tuple(out), eid)
