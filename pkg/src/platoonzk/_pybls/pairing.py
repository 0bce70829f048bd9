"""Optimal ate pairing e: G1 x G2 -> GT for BLS12-381.

The Miller loop walks |x| with the G2 point kept in affine twist
coordinates.  With the untwist (x', y') -> (x' w^-2, y' w^-3), the line
through T with slope lam, evaluated at P = (xp, yp) and scaled by w^3, is

    (lam*xT - yT) + (-lam*xp) v + yp v w

which is the sparse Fp12 element fed to ``_mul_by_line``.
"""

from . import fields as F
from .curve import G1, G2
from .fields import P, X

_LOOP_BITS = bin(-X)[3:]
# 3 (p^4 - p^2 + 1) / r = (x-1)^2 (x + p)(x^2 + p^2 - 1) + 3; GT values are the
# cube of the textbook pairing, matching the compiled backend byte for byte
_HARD_A = (X - 1) ** 2


def _mul_by_line(f, A, B, yp):
    f0, f1 = f
    l0 = (A, B, F.F2_ZERO)
    t0 = F.f6_mul(f0, l0)
    # f1 * (yp v) = yp * (xi f1_2, f1_0, f1_1)
    v1 = F.f6_mul_v(f1)
    t1 = (F.f2_scale(v1[0], yp), F.f2_scale(v1[1], yp), F.f2_scale(v1[2], yp))
    # f0 * (yp v) + f1 * l0
    v0 = F.f6_mul_v(f0)
    c1 = F.f6_add((F.f2_scale(v0[0], yp), F.f2_scale(v0[1], yp), F.f2_scale(v0[2], yp)), F.f6_mul(f1, l0))
    return (F.f6_add(t0, F.f6_mul_v(t1)), c1)


def _line(lam, xt, yt, xp):
    A = F.f2_sub(F.f2_mul(lam, xt), yt)
    B = F.f2_scale(F.f2_neg(lam), xp)
    return A, B


def miller_loop(pairs):
    """Product of Miller functions f_{x,Q}(P) over affine (P, Q) pairs."""
    work = []
    for p_aff, q_aff in pairs:
        if p_aff is None or q_aff is None:
            continue
        work.append([p_aff[0], p_aff[1], q_aff[0], q_aff[1], q_aff[0], q_aff[1]])
    f = F.F12_ONE
    if not work:
        return f
    for bit in _LOOP_BITS:
        f = F.f12_sqr(f)
        for item in work:
            xp, yp, xq, yq, xt, yt = item
            # tangent at T
            lam = F.f2_mul(F.f2_scale(F.f2_sqr(xt), 3), F.f2_inv(F.f2_add(yt, yt)))
            A, B = _line(lam, xt, yt, xp)
            f = _mul_by_line(f, A, B, yp)
            x3 = F.f2_sub(F.f2_sqr(lam), F.f2_add(xt, xt))
            yt = F.f2_sub(F.f2_mul(lam, F.f2_sub(xt, x3)), yt)
            xt = x3
            if bit == "1":
                lam = F.f2_mul(F.f2_sub(yq, yt), F.f2_inv(F.f2_sub(xq, xt)))
                A, B = _line(lam, xt, yt, xp)
                f = _mul_by_line(f, A, B, yp)
                x3 = F.f2_sub(F.f2_sub(F.f2_sqr(lam), xt), xq)
                yt = F.f2_sub(F.f2_mul(lam, F.f2_sub(xt, x3)), yt)
                xt = x3
            item[4], item[5] = xt, yt
    # x is negative
    return F.f12_conj(f)


def _pow_cyc(a, e):
    """a^e for a in the cyclotomic subgroup, e any integer."""
    if e < 0:
        return F.f12_conj(F.f12_pow(a, -e))
    return F.f12_pow(a, e)


def final_exponentiation(f):
    # easy part: f^((p^6 - 1)(p^2 + 1))
    f = F.f12_mul(F.f12_conj(f), F.f12_inv(f))
    f = F.f12_mul(F.f12_frobenius(f, 2), f)
    # hard part, times 3: 3 (p^4 - p^2 + 1) / r
    y0 = _pow_cyc(f, _HARD_A)
    y1 = F.f12_mul(_pow_cyc(y0, X), F.f12_frobenius(y0, 1))
    y2 = _pow_cyc(_pow_cyc(y1, X), X)
    y2 = F.f12_mul(F.f12_mul(y2, F.f12_frobenius(y1, 2)), F.f12_conj(y1))
    return F.f12_mul(y2, F.f12_mul(F.f12_sqr(f), f))


def pairing(p_jac, q_jac):
    return final_exponentiation(miller_loop([(G1.to_affine(p_jac), G2.to_affine(q_jac))]))


def pairing_product_is_one(pairs):
    affine = [(G1.to_affine(p), G2.to_affine(q)) for p, q in pairs]
    return final_exponentiation(miller_loop(affine)) == F.F12_ONE
