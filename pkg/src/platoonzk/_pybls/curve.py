"""Short Weierstrass arithmetic for G1 (over Fp) and G2 (over Fp2).

Points are Jacobian triples (X, Y, Z) with Z == 0 the point at infinity.
The same formulas serve both groups; each group carries its field ops.
"""

from . import fields as F
from .fields import P, R


class _FpOps:
    zero = 0
    one = 1

    @staticmethod
    def add(a, b):
        return (a + b) % P

    @staticmethod
    def sub(a, b):
        return (a - b) % P

    @staticmethod
    def mul(a, b):
        return a * b % P

    @staticmethod
    def sqr(a):
        return a * a % P

    @staticmethod
    def neg(a):
        return -a % P

    @staticmethod
    def inv(a):
        return F.fp_inv(a)

    @staticmethod
    def is_zero(a):
        return a == 0

    @staticmethod
    def small(k):
        return k % P


class _Fp2Ops:
    zero = F.F2_ZERO
    one = F.F2_ONE
    add = staticmethod(F.f2_add)
    sub = staticmethod(F.f2_sub)
    mul = staticmethod(F.f2_mul)
    sqr = staticmethod(F.f2_sqr)
    neg = staticmethod(F.f2_neg)
    inv = staticmethod(F.f2_inv)
    is_zero = staticmethod(F.f2_is_zero)

    @staticmethod
    def small(k):
        return (k % P, 0)


class Group:
    """One curve group: y^2 = x^3 + b over the given field."""

    def __init__(self, name, ops, b, generator):
        self.name = name
        self.ops = ops
        self.b = b
        self.infinity = (ops.one, ops.one, ops.zero)
        self.generator = (generator[0], generator[1], ops.one)

    def is_infinity(self, pt):
        return self.ops.is_zero(pt[2])

    def double(self, pt):
        f = self.ops
        X, Y, Z = pt
        if f.is_zero(Z) or f.is_zero(Y):
            return self.infinity
        A = f.sqr(X)
        B = f.sqr(Y)
        C = f.sqr(B)
        D = f.sub(f.sqr(f.add(X, B)), f.add(A, C))
        D = f.add(D, D)
        E = f.add(f.add(A, A), A)
        G = f.sqr(E)
        X3 = f.sub(G, f.add(D, D))
        C8 = f.add(C, C)
        C8 = f.add(C8, C8)
        C8 = f.add(C8, C8)
        Y3 = f.sub(f.mul(E, f.sub(D, X3)), C8)
        YZ = f.mul(Y, Z)
        return (X3, Y3, f.add(YZ, YZ))

    def add(self, p1, p2):
        f = self.ops
        X1, Y1, Z1 = p1
        X2, Y2, Z2 = p2
        if f.is_zero(Z1):
            return p2
        if f.is_zero(Z2):
            return p1
        Z1Z1 = f.sqr(Z1)
        Z2Z2 = f.sqr(Z2)
        U1 = f.mul(X1, Z2Z2)
        U2 = f.mul(X2, Z1Z1)
        S1 = f.mul(f.mul(Y1, Z2), Z2Z2)
        S2 = f.mul(f.mul(Y2, Z1), Z1Z1)
        H = f.sub(U2, U1)
        rr = f.sub(S2, S1)
        if f.is_zero(H):
            if f.is_zero(rr):
                return self.double(p1)
            return self.infinity
        rr = f.add(rr, rr)
        I = f.sqr(f.add(H, H))
        J = f.mul(H, I)
        V = f.mul(U1, I)
        X3 = f.sub(f.sub(f.sqr(rr), J), f.add(V, V))
        S1J = f.mul(S1, J)
        Y3 = f.sub(f.mul(rr, f.sub(V, X3)), f.add(S1J, S1J))
        Z3 = f.mul(f.sub(f.sqr(f.add(Z1, Z2)), f.add(Z1Z1, Z2Z2)), H)
        return (X3, Y3, Z3)

    def neg(self, pt):
        return (pt[0], self.ops.neg(pt[1]), pt[2])

    def mul(self, pt, k):
        """Scalar multiplication by a non-negative integer (not reduced)."""
        if k < 0:
            return self.mul(self.neg(pt), -k)
        result = self.infinity
        for bit in bin(k)[2:]:
            result = self.double(result)
            if bit == "1":
                result = self.add(result, pt)
        return result

    def to_affine(self, pt):
        f = self.ops
        if f.is_zero(pt[2]):
            return None
        zinv = f.inv(pt[2])
        zinv2 = f.sqr(zinv)
        return (f.mul(pt[0], zinv2), f.mul(pt[1], f.mul(zinv2, zinv)))

    def from_affine(self, xy):
        if xy is None:
            return self.infinity
        return (xy[0], xy[1], self.ops.one)

    def on_curve_affine(self, x, y):
        f = self.ops
        return f.sqr(y) == f.add(f.mul(f.sqr(x), x), self.b)

    def eq(self, p1, p2):
        return self.to_affine(p1) == self.to_affine(p2)

    def in_subgroup(self, pt):
        return self.is_infinity(self.mul(pt, R))


G1 = Group(
    "G1",
    _FpOps,
    4,
    (
        0x17F1D3A73197D7942695638C4FA9AC0FC3688C4F9774B905A14E3A3F171BAC586C55E83FF97A1AEFFB3AF00ADB22C6BB,
        0x08B3F481E3AAA0F1A09E30ED741D8AE4FCF5E095D5D00AF600DB18CB2C04B3EDD03CC744A2888AE40CAA232946C5E7E1,
    ),
)

G2 = Group(
    "G2",
    _Fp2Ops,
    (4, 4),
    (
        (
            0x024AA2B2F08F0A91260805272DC51051C6E47AD4FA403B02B4510B647AE3D1770BAC0326A805BBEFD48056C8C121BDB8,
            0x13E02B6052719F607DACD3A088274F65596BD0D09920B61AB5DA61BBDC7F5049334CF11213945D57E5AC7D055D042B7E,
        ),
        (
            0x0CE5D527727D6E118CC9CDC6DA2E351AADFD9BAA8CBDD3A76D429A695160D12C923AC9CC3BACA289E193548608B82801,
            0x0606C4A02EA734CC32ACD2B02BC28B99CB3E287E85A763AF267492AB572E99AB3F370D275CEC1DA1AAA9075FF05F79BE,
        ),
    ),
)


# -- compressed encoding (zcash convention) ---------------------------------

_FLAG_COMPRESSED = 0x80
_FLAG_INFINITY = 0x40
_FLAG_SIGN = 0x20


def _fp_lex_largest(y):
    return y > (P - 1) // 2


def _fp2_lex_largest(y):
    if y[1] != 0:
        return _fp_lex_largest(y[1])
    return _fp_lex_largest(y[0])


def g1_compress(pt):
    aff = G1.to_affine(pt)
    if aff is None:
        return bytes([_FLAG_COMPRESSED | _FLAG_INFINITY]) + bytes(47)
    x, y = aff
    out = bytearray(x.to_bytes(48, "big"))
    out[0] |= _FLAG_COMPRESSED
    if _fp_lex_largest(y):
        out[0] |= _FLAG_SIGN
    return bytes(out)


def g2_compress(pt):
    aff = G2.to_affine(pt)
    if aff is None:
        return bytes([_FLAG_COMPRESSED | _FLAG_INFINITY]) + bytes(95)
    x, y = aff
    out = bytearray(x[1].to_bytes(48, "big") + x[0].to_bytes(48, "big"))
    out[0] |= _FLAG_COMPRESSED
    if _fp2_lex_largest(y):
        out[0] |= _FLAG_SIGN
    return bytes(out)


def _split_flags(data, size):
    if len(data) != size:
        raise ValueError(f"expected {size} bytes, got {len(data)}")
    flags = data[0] & 0xE0
    if not flags & _FLAG_COMPRESSED:
        raise ValueError("compression flag not set")
    body = bytes([data[0] & 0x1F]) + bytes(data[1:])
    return bool(flags & _FLAG_INFINITY), bool(flags & _FLAG_SIGN), body


def g1_decompress(data):
    """Decode and fully validate (on-curve and prime-order subgroup)."""
    infinity, sign, body = _split_flags(data, 48)
    if infinity:
        if sign or any(body):
            raise ValueError("non-canonical infinity encoding")
        return G1.infinity
    x = int.from_bytes(body, "big")
    if x >= P:
        raise ValueError("x coordinate not reduced")
    y = F.fp_sqrt((x * x * x + 4) % P)
    if y is None:
        raise ValueError("point not on curve")
    if _fp_lex_largest(y) != sign:
        y = P - y
    pt = (x, y, 1)
    if not G1.in_subgroup(pt):
        raise ValueError("point not in prime-order subgroup")
    return pt


def g2_decompress(data):
    infinity, sign, body = _split_flags(data, 96)
    if infinity:
        if sign or any(body):
            raise ValueError("non-canonical infinity encoding")
        return G2.infinity
    x1 = int.from_bytes(body[:48], "big")
    x0 = int.from_bytes(body[48:], "big")
    if x0 >= P or x1 >= P:
        raise ValueError("x coordinate not reduced")
    x = (x0, x1)
    rhs = F.f2_add(F.f2_mul(F.f2_sqr(x), x), (4, 4))
    y = F.f2_sqrt(rhs)
    if y is None:
        raise ValueError("point not on curve")
    if _fp2_lex_largest(y) != sign:
        y = F.f2_neg(y)
    pt = (x, y, F.F2_ONE)
    if not G2.in_subgroup(pt):
        raise ValueError("point not in prime-order subgroup")
    return pt
