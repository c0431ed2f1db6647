"""Classical pedagogical ciphers: alphabet shift (Caesar) and reversal.

These are demonstration ciphers only. Nothing on the storage path uses them.
"""

from __future__ import annotations

from dataclasses import dataclass

ALPHABET_SIZE = 26


@dataclass(frozen=True)
class ShiftKey:
    shift: int

    def __post_init__(self):
        object.__setattr__(self, "shift", int(self.shift) % ALPHABET_SIZE)

    def inverse(self) -> "ShiftKey":
        return ShiftKey(-self.shift)


def _as_key(key: ShiftKey | int) -> ShiftKey:
    return key if isinstance(key, ShiftKey) else ShiftKey(key)


def _rotate(text: str, shift: int) -> str:
    out = []
    for ch in text:
        if "a" <= ch <= "z":
            out.append(chr((ord(ch) - 97 + shift) % ALPHABET_SIZE + 97))
        elif "A" <= ch <= "Z":
            out.append(chr((ord(ch) - 65 + shift) % ALPHABET_SIZE + 65))
        else:
            out.append(ch)
    return "".join(out)


def shift_encrypt(plaintext: str, key: ShiftKey | int) -> str:
    """Shift every ASCII letter forward by ``key`` places within its case.

    >>> shift_encrypt("abcd", 3)
    'defg'
    """
    return _rotate(plaintext, _as_key(key).shift)


def shift_decrypt(ciphertext: str, key: ShiftKey | int) -> str:
    return _rotate(ciphertext, -_as_key(key).shift)


def reverse_cipher(text: str) -> str:
    return text[::-1]


def shifted_alphabet(key: ShiftKey | int) -> str:
    return shift_encrypt("abcdefghijklmnopqrstuvwxyz", key)
