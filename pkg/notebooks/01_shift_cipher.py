"""
Shift and reverse ciphers
=========================

A toy substitution cipher before the real thing. Every letter moves a
fixed number of places along the alphabet; case survives and anything
that is not an ASCII letter passes through untouched.
"""

from collections import Counter

from tdestore.cipherlab import ShiftKey, reverse_cipher, shift_decrypt, shift_encrypt, shifted_alphabet

# the classic example, a shift of three
print(shift_encrypt("abcd", 3))
print(shifted_alphabet(3))

# keys reduce mod 26, so 29 and 3 are the same key
key = ShiftKey(29)
secret = shift_encrypt("Attack at dawn!", key)
print(secret, "->", shift_decrypt(secret, key))

# letter frequencies are only rotated, which is why the cipher is weak
text = "the quick brown fox jumps over the lazy dog and keeps running"
before = Counter(c for c in text if c.isalpha()).most_common(3)
after = Counter(c for c in shift_encrypt(text, 3) if c.isalpha()).most_common(3)
print("most common before:", before)
print("most common after: ", after)

# reversing is its own inverse
print(reverse_cipher("abcd"), reverse_cipher(reverse_cipher("abcd")))
