"""Symbolic derivation of the boundary expansions used by the spectral
shooting engine.

The mode equation (shrinker form; the expander problem reduces to it by
substituting out the Gaussian factor and shifting the eigenvalue by d/2):

    v'' + ((d-1)/y - y/2) v' + (lam - (d-1) cos(2 f) / y^2) v = 0

Origin: f = a y + c3 y^3 + c5 y^5, admissible v = y + e3 y^3 + e5 y^5.
Infinity: f = pi/2 + b + c2/y^2 + c4/y^4, admissible
v = y^(2 lam) (1 + e2/y^2 + e4/y^4).

Prints the coefficients pasted into spectral.py; run to re-derive.
"""

import sympy as sp

y, a, d, lam, b = sp.symbols("y a d lam b", positive=True)
c3, c5, c2, c4 = sp.symbols("c3 c5 c2 c4")
e3, e5, e2, e4 = sp.symbols("e3 e5 e2 e4")


def operator(v, f):
    return (
        sp.diff(v, y, 2)
        + ((d - 1) / y - y / 2) * sp.diff(v, y)
        + (lam - (d - 1) * sp.cos(2 * f) / y**2) * v
    )


def origin():
    f = a * y + c3 * y**3 + c5 * y**5
    v = y + e3 * y**3 + e5 * y**5
    expr = operator(v, f).series(y, 0, 4).removeO()
    poly = sp.Poly(sp.expand(expr), y)
    sol3 = sp.solve(poly.coeff_monomial(y), e3)[0]
    sol5 = sp.solve(poly.coeff_monomial(y**3).subs(e3, sol3), e5)[0]
    print("e3 =", sp.simplify(sol3))
    print("e5 =", sp.factor(sp.simplify(sol5)))


def tail():
    f = sp.pi / 2 + b + c2 / y**2 + c4 / y**4
    v = y ** (2 * lam) * (1 + e2 / y**2 + e4 / y**4)
    expr = sp.expand(operator(v, f) * y ** (2 - 2 * lam))
    # expand in 1/y: substitute y -> 1/u and series in u
    u = sp.symbols("u", positive=True)
    g = expr.subs(y, 1 / u)
    g = sp.series(g, u, 0, 5).removeO()
    poly = sp.Poly(sp.expand(g), u)
    sol2 = sp.solve(poly.coeff_monomial(u**0), e2)[0]
    sol4 = sp.solve(poly.coeff_monomial(u**2).subs(e2, sol2), e4)[0]
    print("e2 =", sp.simplify(sol2))
    print("e4 =", sp.factor(sp.simplify(sol4)))


if __name__ == "__main__":
    origin()
    tail()
