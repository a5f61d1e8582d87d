"""
Générateur pseudo-aléatoire SplitMix64, vectorisé

Sortie k (k = 1, 2, ...) pour une graine s:
    z = s + k * 0x9E3779B97F4A7C15            (mod 2^64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    sortie = z ^ (z >> 31)

Tirage uniforme dans [0, bound): rejet des sorties v < (2^64 mod bound), puis v mod bound.
Les tirages rejetés sont remplacés dans l'ordre du flux, le résultat est donc
identique à une implémentation scalaire séquentielle.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_1 = 0xBF58476D1CE4E5B9
MIX_2 = 0x94D049BB133111EB

_GAMMA = np.uint64(GOLDEN_GAMMA)
_MIX_1 = np.uint64(MIX_1)
_MIX_2 = np.uint64(MIX_2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


def mix64(z: int) -> int:
    """Fonction de mélange, version scalaire de référence"""
    z = ((z ^ (z >> 30)) * MIX_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Flux SplitMix64 avec tirages par blocs"""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def next_block(self, count: int) -> np.ndarray:
        """Les `count` prochaines sorties, en uint64"""
        if count <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * _GAMMA
            z = (z ^ (z >> _S30)) * _MIX_1
            z = (z ^ (z >> _S27)) * _MIX_2
            z = z ^ (z >> _S31)
        self.state = (self.state + count * GOLDEN_GAMMA) & MASK64
        return z

    def uniform_below(self, bound: int, count: int) -> np.ndarray:
        """`count` tirages uniformes dans [0, bound), sans biais de modulo"""
        if bound < 1:
            raise ValueError("bound doit être >= 1")
        threshold = (1 << 64) % bound
        result = np.empty(count, dtype=np.uint64)
        filled = 0
        while filled < count:
            block = self.next_block(count - filled)
            if threshold:
                block = block[block >= np.uint64(threshold)]
            result[filled:filled + block.size] = block
            filled += block.size
        return result % np.uint64(bound)
