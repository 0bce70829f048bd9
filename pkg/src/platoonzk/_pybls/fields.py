"""Tower arithmetic for BLS12-381: Fp, Fp2 = Fp[u]/(u^2+1),
Fp6 = Fp2[v]/(v^3-(u+1)), Fp12 = Fp6[w]/(w^2-v).

Elements are plain tuples of ints so the hot loops stay allocation-light.
Every function returns fully reduced values.
"""

P = 0x1A0111EA397FE69A4B1BA7B6434BACD764774B84F38512BF6730D2A0F6B0F6241EABFFFEB153FFFFB9FEFFFFFFFFAAAB
R = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
# BLS parameter x (negative)
X = -0xD201000000010000

F2_ZERO = (0, 0)
F2_ONE = (1, 0)
F6_ZERO = (F2_ZERO, F2_ZERO, F2_ZERO)
F6_ONE = (F2_ONE, F2_ZERO, F2_ZERO)
F12_ONE = (F6_ONE, F6_ZERO)


def fp_inv(a):
    if a % P == 0:
        raise ZeroDivisionError("inverse of zero in Fp")
    return pow(a, -1, P)


def fp_sqrt(a):
    """Square root in Fp (p = 3 mod 4), or None when a is a non-residue."""
    a %= P
    s = pow(a, (P + 1) // 4, P)
    return s if s * s % P == a else None


def fp_sgn0(a):
    return a & 1


# -- Fp2 ---------------------------------------------------------------------


def f2_add(a, b):
    return ((a[0] + b[0]) % P, (a[1] + b[1]) % P)


def f2_sub(a, b):
    return ((a[0] - b[0]) % P, (a[1] - b[1]) % P)


def f2_neg(a):
    return (-a[0] % P, -a[1] % P)


def f2_mul(a, b):
    a0, a1 = a
    b0, b1 = b
    t0 = a0 * b0
    t1 = a1 * b1
    return ((t0 - t1) % P, ((a0 + a1) * (b0 + b1) - t0 - t1) % P)


def f2_sqr(a):
    a0, a1 = a
    return ((a0 + a1) * (a0 - a1) % P, 2 * a0 * a1 % P)


def f2_scale(a, k):
    return (a[0] * k % P, a[1] * k % P)


def f2_mul_xi(a):
    # (a0 + a1 u)(1 + u)
    a0, a1 = a
    return ((a0 - a1) % P, (a0 + a1) % P)


def f2_conj(a):
    return (a[0], -a[1] % P)


def f2_inv(a):
    a0, a1 = a
    t = fp_inv(a0 * a0 + a1 * a1)
    return (a0 * t % P, -a1 * t % P)


def f2_pow(a, e):
    result = F2_ONE
    base = a
    while e:
        if e & 1:
            result = f2_mul(result, base)
        base = f2_sqr(base)
        e >>= 1
    return result


def f2_is_zero(a):
    return a[0] == 0 and a[1] == 0


def f2_sgn0(a):
    sign_0 = a[0] & 1
    zero_0 = a[0] == 0
    return sign_0 or (zero_0 and (a[1] & 1))


def f2_sqrt(a):
    """Square root in Fp2 via the norm trick, or None for non-squares."""
    a0, a1 = a[0] % P, a[1] % P
    if a1 == 0:
        s = fp_sqrt(a0)
        if s is not None:
            return (s, 0)
        s = fp_sqrt(-a0)
        return (0, s)
    norm_root = fp_sqrt(a0 * a0 + a1 * a1)
    if norm_root is None:
        return None
    half = fp_inv(2)
    for cand in ((a0 + norm_root) * half, (a0 - norm_root) * half):
        x0 = fp_sqrt(cand)
        if x0 is None or x0 == 0:
            continue
        x1 = a1 * fp_inv(2 * x0) % P
        root = (x0, x1)
        if f2_sqr(root) == (a0, a1):
            return root
    return None


# -- Fp6 ---------------------------------------------------------------------


def f6_add(a, b):
    return (f2_add(a[0], b[0]), f2_add(a[1], b[1]), f2_add(a[2], b[2]))


def f6_sub(a, b):
    return (f2_sub(a[0], b[0]), f2_sub(a[1], b[1]), f2_sub(a[2], b[2]))


def f6_neg(a):
    return (f2_neg(a[0]), f2_neg(a[1]), f2_neg(a[2]))


def f6_mul(a, b):
    a0, a1, a2 = a
    b0, b1, b2 = b
    t0 = f2_mul(a0, b0)
    t1 = f2_mul(a1, b1)
    t2 = f2_mul(a2, b2)
    c0 = f2_add(t0, f2_mul_xi(f2_sub(f2_mul(f2_add(a1, a2), f2_add(b1, b2)), f2_add(t1, t2))))
    c1 = f2_add(f2_sub(f2_mul(f2_add(a0, a1), f2_add(b0, b1)), f2_add(t0, t1)), f2_mul_xi(t2))
    c2 = f2_add(f2_sub(f2_mul(f2_add(a0, a2), f2_add(b0, b2)), f2_add(t0, t2)), t1)
    return (c0, c1, c2)


def f6_sqr(a):
    return f6_mul(a, a)


def f6_mul_v(a):
    return (f2_mul_xi(a[2]), a[0], a[1])


def f6_inv(a):
    a0, a1, a2 = a
    c0 = f2_sub(f2_sqr(a0), f2_mul_xi(f2_mul(a1, a2)))
    c1 = f2_sub(f2_mul_xi(f2_sqr(a2)), f2_mul(a0, a1))
    c2 = f2_sub(f2_sqr(a1), f2_mul(a0, a2))
    t = f2_add(f2_mul(a0, c0), f2_mul_xi(f2_add(f2_mul(a2, c1), f2_mul(a1, c2))))
    t = f2_inv(t)
    return (f2_mul(c0, t), f2_mul(c1, t), f2_mul(c2, t))


# -- Fp12 --------------------------------------------------------------------


def f12_mul(a, b):
    a0, a1 = a
    b0, b1 = b
    t0 = f6_mul(a0, b0)
    t1 = f6_mul(a1, b1)
    c1 = f6_sub(f6_mul(f6_add(a0, a1), f6_add(b0, b1)), f6_add(t0, t1))
    return (f6_add(t0, f6_mul_v(t1)), c1)


def f12_sqr(a):
    a0, a1 = a
    ab = f6_mul(a0, a1)
    c0 = f6_mul(f6_add(a0, a1), f6_add(a0, f6_mul_v(a1)))
    c0 = f6_sub(c0, f6_add(ab, f6_mul_v(ab)))
    return (c0, f6_add(ab, ab))


def f12_conj(a):
    return (a[0], f6_neg(a[1]))


def f12_inv(a):
    a0, a1 = a
    t = f6_inv(f6_sub(f6_sqr(a0), f6_mul_v(f6_sqr(a1))))
    return (f6_mul(a0, t), f6_neg(f6_mul(a1, t)))


def f12_pow(a, e):
    if e < 0:
        return f12_pow(f12_inv(a), -e)
    result = F12_ONE
    for bit in bin(e)[2:]:
        result = f12_sqr(result)
        if bit == "1":
            result = f12_mul(result, a)
    return result


# Frobenius coefficients for the w-power basis: gamma_i = xi^(i (p-1) / 6)
_XI = (1, 1)
_FROB_GAMMA = tuple(f2_pow(_XI, i * (P - 1) // 6) for i in range(6))


def f12_frobenius(a, power=1):
    for _ in range(power):
        (a0, a1, a2), (b0, b1, b2) = a
        # coefficient of w^i: a0, b0, a1, b1, a2, b2 for i = 0..5
        g = _FROB_GAMMA
        a = (
            (f2_conj(a0), f2_mul(f2_conj(a1), g[2]), f2_mul(f2_conj(a2), g[4])),
            (f2_mul(f2_conj(b0), g[1]), f2_mul(f2_conj(b1), g[3]), f2_mul(f2_conj(b2), g[5])),
        )
    return a


def f12_to_bytes(a):
    """Canonical 576-byte encoding, coefficients in tower order, big-endian."""
    out = bytearray()
    for c6 in a:
        for c2 in c6:
            for c in c2:
                out += c.to_bytes(48, "big")
    return bytes(out)


def f12_from_bytes(data):
    if len(data) != 576:
        raise ValueError("target group encoding must be 576 bytes")
    vals = [int.from_bytes(data[i : i + 48], "big") for i in range(0, 576, 48)]
    if any(v >= P for v in vals):
        raise ValueError("non-canonical field element")
    c2 = [(vals[i], vals[i + 1]) for i in range(0, 12, 2)]
    return ((c2[0], c2[1], c2[2]), (c2[3], c2[4], c2[5]))
