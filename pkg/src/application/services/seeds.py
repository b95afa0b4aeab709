import hashlib

SEED_LABELS = ("rff", "init", "kmeans", "shuffle", "episodes", "data")


def derive_seed(master: int, label: str) -> int:
    """Stable 64-bit sub-seed: first 8 bytes (big-endian) of sha256("{master}:{label}")."""
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def seed_table(master: int, extra_labels: tuple[str, ...] = ()) -> dict[str, int]:
    return {label: derive_seed(master, label) for label in (*SEED_LABELS, *extra_labels)}
