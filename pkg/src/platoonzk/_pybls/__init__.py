"""Pure-Python BLS12-381 backend.

Byte-level surface shared with the compiled ``platoonzk._native`` module:
points travel as compressed encodings (48 bytes G1, 96 bytes G2), scalars
as Python ints, target-group values as :class:`Gt`.
"""

from . import fields as _F
from . import pairing as _pairing
from .curve import G1, G2, g1_compress, g1_decompress, g2_compress, g2_decompress
from .hash_to_curve import hash_to_g1 as _hash_to_g1

NAME = "python"
R = _F.R


class Gt:
    """Element of the order-r target group (multiplicative notation)."""

    __slots__ = ("_v",)

    def __init__(self, value):
        self._v = value

    @classmethod
    def one(cls):
        return cls(_F.F12_ONE)

    @classmethod
    def from_bytes(cls, data):
        return cls(_F.f12_from_bytes(bytes(data)))

    def to_bytes(self):
        return _F.f12_to_bytes(self._v)

    def __mul__(self, other):
        return Gt(_F.f12_mul(self._v, other._v))

    def __pow__(self, k):
        return Gt(_pairing._pow_cyc(self._v, k % R))

    def __eq__(self, other):
        return isinstance(other, Gt) and self._v == other._v

    def __hash__(self):
        return hash(self.to_bytes())

    def is_one(self):
        return self._v == _F.F12_ONE


def g1_generator():
    return g1_compress(G1.generator)


def g2_generator():
    return g2_compress(G2.generator)


def g1_validate(data):
    try:
        g1_decompress(bytes(data))
    except ValueError:
        return False
    return True


def g2_validate(data):
    try:
        g2_decompress(bytes(data))
    except ValueError:
        return False
    return True


def g1_mul(point, k):
    return g1_compress(G1.mul(g1_decompress(point), k % R))


def g2_mul(point, k):
    return g2_compress(G2.mul(g2_decompress(point), k % R))


def g1_add(a, b):
    return g1_compress(G1.add(g1_decompress(a), g1_decompress(b)))


def g2_add(a, b):
    return g2_compress(G2.add(g2_decompress(a), g2_decompress(b)))


def hash_to_g1(msg, dst):
    return g1_compress(_hash_to_g1(bytes(msg), bytes(dst)))


def pairing(p, q):
    return Gt(_pairing.pairing(g1_decompress(p), g2_decompress(q)))


def pairing_check(pairs):
    """True iff the product of e(p_i, q_i) is the identity of GT."""
    decoded = [(g1_decompress(p), g2_decompress(q)) for p, q in pairs]
    return _pairing.pairing_product_is_one(decoded)


def g1_neg(point):
    return g1_compress(G1.neg(g1_decompress(point)))
