"""Детерминированная раздача сидов: один мастер-сид на весь эксперимент."""
import hashlib

import numpy as np


def label_entropy(*labels) -> list[int]:
    """Превращает метки (строки и числа) в стабильную энтропию для SeedSequence."""
    words = []
    for label in labels:
        if isinstance(label, (int, np.integer)):
            words.append(int(label) & 0xFFFFFFFFFFFFFFFF)
        else:
            digest = hashlib.sha256(str(label).encode("utf-8")).digest()
            words.append(int.from_bytes(digest[:8], "little"))
    return words


def derive_seed(seed: int, *labels) -> int:
    sequence = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *label_entropy(*labels)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed: int, *labels) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(
        [int(seed) & 0xFFFFFFFFFFFFFFFF, *label_entropy(*labels)]))
