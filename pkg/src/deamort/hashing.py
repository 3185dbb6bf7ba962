"""Seeded hash functions mapping keys to cells of the two tables.

The construction is documented bit-exactly so any run can be reproduced
from the seed string alone.

Mixer (``mix64``), operating on 64-bit unsigned integers mod 2**64::

    x ^= x >> 30
    x *= 0xBF58476D1CE4E5B9
    x ^= x >> 27
    x *= 0x94D049BB133111EB
    x ^= x >> 31

This is the splitmix64 finalizer; ``mix64((0 + GOLDEN) % 2**64)`` equals
0xE220A8397B1DCDAF, the first output of the public splitmix64 stream for
seed 0, which the tests pin.

A :class:`HashSeed` carries 128 bits of material, split into halves
``lo = material & (2**64 - 1)`` and ``hi = material >> 64``.  Each table
``t`` in {0, 1} uses the sub-seed pair::

    a_t = mix64(lo ^ mix64((hi + (2*t + 1) * GOLDEN) % 2**64))
    b_t = mix64(hi ^ mix64((lo + (2*t + 2) * GOLDEN) % 2**64))

with GOLDEN = 0x9E3779B97F4A7C15.  The cell for a canonicalized 64-bit
key ``k`` in a table of ``size`` slots is::

    raw  = mix64((mix64(k ^ a_t) + b_t) % 2**64)
    slot = (raw * size) >> 64        # multiply-shift range reduction

Multiply-shift keeps every table size exact (no power-of-two rounding),
so the slack parameter can take any value.

Keys are canonicalized to 64-bit unsigned integers at the API boundary:
ints are reduced mod 2**64, str/bytes are folded through the same mixer
(see :func:`canonicalize_key`).  Nothing here aims at cryptographic
strength; the family is a documented, reproducible stand-in for the
idealized random functions the analysis assumes.
"""

from __future__ import annotations

from dataclasses import dataclass

MASK64 = (1 << 64) - 1
MASK128 = (1 << 128) - 1
GOLDEN = 0x9E3779B97F4A7C15

_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """Scramble a 64-bit value with the splitmix64 finalizer.

    Args:
        x: value in [0, 2**64); larger ints are reduced mod 2**64.

    Returns:
        The mixed 64-bit value.  Bijective on [0, 2**64).
    """
    x &= MASK64
    x ^= x >> 30
    x = (x * _MUL1) & MASK64
    x ^= x >> 27
    x = (x * _MUL2) & MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class HashSeed:
    """128 bits of seed material plus a reseed generation counter.

    Equal (material, generation) pairs define identical hash functions.
    """

    material: int
    generation: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.material <= MASK128:
            raise ValueError("seed material must fit in 128 bits")
        if self.generation < 0:
            raise ValueError("generation must be non-negative")


@dataclass(frozen=True)
class CellIndex:
    """Address of one slot: which table and which slot within it."""

    table_id: int
    slot: int

    def __post_init__(self) -> None:
        if self.table_id not in (0, 1):
            raise ValueError("table_id must be 0 or 1")
        if self.slot < 0:
            raise ValueError("slot must be non-negative")


def canonicalize_key(key: int | str | bytes | bytearray) -> int:
    """Reduce a key to the 64-bit unsigned integer the tables store.

    ints are reduced mod 2**64 (so -1 becomes 2**64 - 1).  str is folded
    as its UTF-8 bytes.  bytes are length-prefixed and folded through
    the mixer 8 bytes at a time, little-endian, zero-padded::

        h = mix64(GOLDEN ^ len(data))
        for each 8-byte chunk c:  h = mix64(h ^ c)

    The fold is unkeyed on purpose: a key's canonical form never changes
    across reseeds, only its cell does.

    Args:
        key: int, str, bytes, or bytearray.

    Returns:
        Unsigned 64-bit canonical key.

    Raises:
        TypeError: for unsupported key types.
    """
    if isinstance(key, int):
        return key & MASK64
    if isinstance(key, str):
        data = key.encode("utf-8")
    elif isinstance(key, (bytes, bytearray)):
        data = bytes(key)
    else:
        raise TypeError(f"unsupported key type: {type(key).__name__}")
    h = mix64(GOLDEN ^ len(data))
    for i in range(0, len(data), 8):
        h = mix64(h ^ int.from_bytes(data[i : i + 8], "little"))
    return h


def subseeds(seed: HashSeed) -> tuple[int, int, int, int]:
    """Derive the per-table mixing pairs (a0, b0, a1, b1) from a seed.

    The two tables get statistically independent sub-seeds; the exact
    derivation is in the module docstring.
    """
    lo = seed.material & MASK64
    hi = seed.material >> 64
    a0 = mix64(lo ^ mix64((hi + GOLDEN) & MASK64))
    b0 = mix64(hi ^ mix64((lo + 2 * GOLDEN) & MASK64))
    a1 = mix64(lo ^ mix64((hi + 3 * GOLDEN) & MASK64))
    b1 = mix64(hi ^ mix64((lo + 4 * GOLDEN) & MASK64))
    return a0, b0, a1, b1


def raw_hash(canonical_key: int, a: int, b: int) -> int:
    """Full-width 64-bit hash of a canonical key under one sub-seed pair."""
    return mix64((mix64(canonical_key ^ a) + b) & MASK64)


def cell_slot(canonical_key: int, a: int, b: int, table_size: int) -> int:
    """Slot of a canonical key: raw_hash reduced by multiply-shift.

    Equals (raw_hash(k, a, b) * table_size) >> 64 with the mixer inlined;
    this is the single definition the dictionary hot paths bind to.
    """
    x = canonical_key ^ a
    x ^= x >> 30
    x = (x * _MUL1) & MASK64
    x ^= x >> 27
    x = (x * _MUL2) & MASK64
    x ^= x >> 31
    x = (x + b) & MASK64
    x ^= x >> 30
    x = (x * _MUL1) & MASK64
    x ^= x >> 27
    x = (x * _MUL2) & MASK64
    x ^= x >> 31
    return (x * table_size) >> 64


def hash_cell(
    key: int | str | bytes | bytearray,
    seed: HashSeed,
    table_id: int,
    table_size: int,
) -> CellIndex:
    """Map a key to its cell in one table.

    Deterministic in (key, seed, table_id, table_size); total for every
    table_size >= 1.

    Args:
        key: any supported key (canonicalized internally).
        seed: the active hash seed.
        table_id: 0 or 1.
        table_size: number of slots in that table, >= 1.

    Returns:
        CellIndex with the given table_id and slot in [0, table_size).
    """
    if table_size < 1:
        raise ValueError("table_size must be >= 1")
    if table_id not in (0, 1):
        raise ValueError("table_id must be 0 or 1")
    a0, b0, a1, b1 = subseeds(seed)
    a, b = (a0, b0) if table_id == 0 else (a1, b1)
    return CellIndex(table_id, cell_slot(canonicalize_key(key), a, b, table_size))


def reseed(seed: HashSeed, entropy: int | str | bytes) -> HashSeed:
    """Derive a fresh seed from the old one plus entropy.

    Generation strictly increments; the new material mixes both inputs
    so distinct entropy gives distinct functions::

        e  = canonicalize_key(entropy)
        lo' = mix64(lo ^ mix64(e))
        hi' = mix64(hi ^ mix64((e + GOLDEN) % 2**64))

    Args:
        seed: current seed.
        entropy: any supported key value, folded to 64 bits.

    Returns:
        HashSeed with generation = seed.generation + 1.
    """
    e = canonicalize_key(entropy)
    lo = seed.material & MASK64
    hi = seed.material >> 64
    new_lo = mix64(lo ^ mix64(e))
    new_hi = mix64(hi ^ mix64((e + GOLDEN) & MASK64))
    return HashSeed((new_hi << 64) | new_lo, seed.generation + 1)


def seed_from_hex(text: str) -> HashSeed:
    """Parse seed material from a hex string (CLI flag / environment).

    The string (optional ``0x`` prefix) is read as one big hex integer
    and folded to 128 bits by XOR of consecutive 128-bit limbs, so
    strings longer than 32 hex digits still use all their entropy.
    Generation starts at 0.

    Raises:
        ValueError: empty or non-hex input.
    """
    stripped = text.strip().removeprefix("0x").removeprefix("0X")
    if not stripped:
        raise ValueError("empty seed string")
    value = int(stripped, 16)
    material = 0
    while True:
        material ^= value & MASK128
        value >>= 128
        if not value:
            break
    return HashSeed(material)


def seed_from_int(value: int) -> HashSeed:
    """Expand a plain integer (e.g. a trial's RNG seed) into a HashSeed.

    lo = mix64((v + GOLDEN) % 2**64), hi = mix64((v + 2*GOLDEN) % 2**64)
    with v = value mod 2**64.
    """
    v = value & MASK64
    lo = mix64((v + GOLDEN) & MASK64)
    hi = mix64((v + 2 * GOLDEN) & MASK64)
    return HashSeed((hi << 64) | lo)
