"""64-bit FNV-1a hashing, used for text feature buckets and content hashes."""

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    """Hash a byte string with 64-bit FNV-1a."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def fnv1a_64_hex(data: bytes) -> str:
    return f"{fnv1a_64(data):016x}"
