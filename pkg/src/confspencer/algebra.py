"""Flat-space conformal algebra in exact rational arithmetic, plus the
Janet operators and variational duals acting on Lagrangian densities.

Polynomials are dicts ``{exponent tuple: Fraction}``; a vector field is a
tuple of polynomials.  The bracket is ``[X, Y] = X.grad(Y) - Y.grad(X)``.

Generator order: translations, rotations/boosts in lexicographic plane
order, dilation, special conformal.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from . import curvature as cv
from . import jets, taylor


# exact polynomials

def p_const(c, n):
    c = Fraction(c)
    return {(0,) * n: c} if c else {}


def p_var(i, n, c=1):
    e = [0] * n
    e[i] = 1
    return {tuple(e): Fraction(c)}


def p_add(a, b, s=1):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, Fraction(0)) + s * v
        if out[k] == 0:
            del out[k]
    return out


def p_scale(a, c):
    c = Fraction(c)
    return {k: v * c for k, v in a.items()} if c else {}


def p_mul(a, b):
    out = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            k = tuple(x + y for x, y in zip(ka, kb))
            out[k] = out.get(k, Fraction(0)) + va * vb
    return {k: v for k, v in out.items() if v}


def p_diff(a, i):
    out = {}
    for k, v in a.items():
        if k[i]:
            e = list(k)
            e[i] -= 1
            out[tuple(e)] = out.get(tuple(e), Fraction(0)) + v * k[i]
    return {k: v for k, v in out.items() if v}


def p_eval(a, x):
    total = 0.0
    for k, v in a.items():
        term = float(v)
        for xi, e in zip(x, k):
            if e:
                term *= xi**e
        total += term
    return total


def p_to_expr(a):
    """Exact polynomial as an Expression (coefficients become floats)."""
    out = taylor.Num(0.0)
    for k in sorted(a):
        term = taylor.num(float(a[k]))
        for i, e in enumerate(k):
            if e:
                term = taylor.mul(term, taylor.pow_(taylor.Sym(taylor.coord(i)), e))
        out = taylor.add(out, term)
    return out


def vf_bracket(X, Y):
    n = len(X)
    out = []
    for k in range(n):
        c = {}
        for j in range(n):
            c = p_add(c, p_mul(X[j], p_diff(Y[k], j)))
            c = p_add(c, p_mul(Y[j], p_diff(X[k], j)), -1)
        out.append(c)
    return tuple(out)


def vf_div(X):
    d = {}
    for k in range(len(X)):
        d = p_add(d, p_diff(X[k], k))
    return d


def vf_add(X, Y, s=1):
    return tuple(p_add(a, b, s) for a, b in zip(X, Y))


def vf_scale(X, c):
    return tuple(p_scale(a, c) for a in X)


def vf_zero(n):
    return tuple({} for _ in range(n))


def vf_is_zero(X):
    return all(not a for a in X)


# exact linear algebra

def rref(rows, ncols):
    m = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / Fraction(m[r][c])
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m[:r], pivots


def nullspace(rows, ncols):
    red, piv = rref(rows, ncols)
    free = [c for c in range(ncols) if c not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, pc in zip(red, piv):
            v[pc] = -row[f]
        basis.append(v)
    return basis


# generators

@dataclass(frozen=True)
class Generator:
    kind: str
    label: str
    xi: tuple

    @property
    def n(self):
        return len(self.xi)

    def jacobian(self):
        """``xi^k_j = d_j xi^k``."""
        return [[p_diff(self.xi[k], j) for j in range(self.n)] for k in range(self.n)]

    def trace_second(self):
        """``xi^k_{kj} = d_j d_k xi^k``."""
        return [vf_div(tuple(p_diff(c, j) for c in self.xi)) for j in range(self.n)]

    def div(self):
        return vf_div(self.xi)


def killing_defect(xi, signature):
    """``eta_ka d_b xi^a + eta_ba d_k xi^a - (2/n) div(xi) eta_kb`` (exact)."""
    n = len(xi)
    d = vf_div(xi)
    out = []
    for k in range(n):
        row = []
        for b in range(n):
            t = p_add(p_scale(p_diff(xi[k], b), signature[k]), p_scale(p_diff(xi[b], k), signature[b]))
            if k == b:
                t = p_add(t, p_scale(d, Fraction(2 * signature[k], n)), -1)
            row.append(t)
        out.append(row)
    return out


def generators(n, signature=None):
    if n < 3:
        raise ValueError("conformal generators need n >= 3")
    sig = tuple(signature) if signature else (1,) * n
    gens = []
    for i in range(n):
        xi = list(vf_zero(n))
        xi[i] = p_const(1, n)
        gens.append(Generator("translation", f"P{i + 1}", tuple(xi)))
    for i, j in combinations(range(n), 2):
        xi = list(vf_zero(n))
        xi[i] = p_var(j, n, sig[i])
        xi[j] = p_var(i, n, -sig[j])
        kind = "rotation-boost"
        gens.append(Generator(kind, f"M{i + 1}{j + 1}", tuple(xi)))
    gens.append(Generator("dilation", "D", tuple(p_var(i, n) for i in range(n))))
    sq = {}
    for i in range(n):
        sq = p_add(sq, p_scale(p_mul(p_var(i, n), p_var(i, n)), sig[i]))
    for m in range(n):
        bx = p_var(m, n, sig[m])
        xi = []
        for k in range(n):
            c = p_scale(p_mul(bx, p_var(k, n)), 2)
            if k == m:
                c = p_add(c, sq, -1)
            xi.append(c)
        gens.append(Generator("special-conformal", f"K{m + 1}", tuple(xi)))
    return gens


def _flatten(X, monos):
    return [X[k].get(m, Fraction(0)) for k in range(len(X)) for m in monos]


class ConsistencyError(RuntimeError):
    pass


def _monos_of(fields):
    ms = set()
    for X in fields:
        for c in X:
            ms.update(c.keys())
    return sorted(ms)


def expand(X, gens, monos=None):
    """Exact coefficients of ``X`` in the span of the generator fields."""
    if monos is None:
        monos = _monos_of([g.xi for g in gens] + [X])
    cols = [_flatten(g.xi, monos) for g in gens]
    target = _flatten(X, monos)
    m = len(gens)
    rows = [[cols[j][r] for j in range(m)] + [target[r]] for r in range(len(target))]
    red, piv = rref(rows, m + 1)
    if m in piv:
        raise ConsistencyError("bracket leaves the span of the generators")
    coef = [Fraction(0)] * m
    for row, pc in zip(red, piv):
        coef[pc] = row[m]
    return coef


def structure_constants(gens):
    """``c[mu][nu][lam]`` with ``[xi_mu, xi_nu] = c^{mu nu}_lam xi_lam``."""
    m = len(gens)
    monos = _monos_of([g.xi for g in gens] + [vf_bracket(a.xi, b.xi) for a in gens for b in gens])
    c = [[[Fraction(0)] * m for _ in range(m)] for _ in range(m)]
    for a in range(m):
        for b in range(a + 1, m):
            coef = expand(vf_bracket(gens[a].xi, gens[b].xi), gens, monos)
            c[a][b] = coef
            c[b][a] = [-v for v in coef]
    return c


def jacobi_defect(c):
    """Max |sum_cyc c^{ab}_e c^{ec}_d| over all triples (exact)."""
    m = len(c)
    nz = [[[(e, v) for e, v in enumerate(c[a][b]) if v] for b in range(m)] for a in range(m)]
    worst = Fraction(0)
    for a in range(m):
        for b in range(m):
            for cc in range(m):
                acc = {}
                for x, y, z in ((a, b, cc), (b, cc, a), (cc, a, b)):
                    for e, v in nz[x][y]:
                        for d, w in nz[e][z]:
                            acc[d] = acc.get(d, Fraction(0)) + v * w
                for v in acc.values():
                    worst = max(worst, abs(v))
    return worst


@dataclass
class CConstraint:
    dimension: int
    basis: list


def c_constraint(c):
    """Solutions of ``c^{mu nu}_lam c^lam = 0`` for all ``mu, nu``."""
    m = len(c)
    rows = [c[a][b] for a in range(m) for b in range(a + 1, m)]
    basis = nullspace(rows, m) if rows else [[Fraction(int(i == j)) for i in range(m)] for j in range(m)]
    return CConstraint(len(basis), basis)


def abelian_constants(m):
    return [[[Fraction(0)] * m for _ in range(m)] for _ in range(m)]


def heisenberg_constants():
    c = abelian_constants(3)
    c[0][1][2] = Fraction(1)
    c[1][0][2] = Fraction(-1)
    return c


# total-space action

def slot_names(n):
    names = ["alpha"] + [f"beta{i + 1}" for i in range(n)] + [f"A{i + 1}" for i in range(n)]
    names += [f"B{k + 1}{l + 1}" for k in range(n) for l in range(n)]
    return names


@dataclass(frozen=True)
class LagrangianDensity:
    expr: taylor.Node
    dim: int

    @classmethod
    def parse(cls, text, dim):
        return cls(taylor.parse(text, dim), dim)

    @property
    def slots(self):
        return sorted(taylor.symbols(self.expr) & set(slot_names(self.dim)))


def _S(name):
    return taylor.Sym(name)


def prolonged_field(gen):
    """Coefficient Expressions of the prolonged generator, keyed by symbol name."""
    n = gen.n
    jac = gen.jacobian()
    tr2 = gen.trace_second()
    E = p_to_expr
    coef = {taylor.coord(j): E(gen.xi[j]) for j in range(n)}
    coef["alpha"] = taylor.mul(taylor.num(-1.0 / n), E(vf_div(gen.xi)))
    for j in range(n):
        t = E(tr2[j])
        for k in range(n):
            t = taylor.add(t, taylor.mul(E(jac[k][j]), _S(f"beta{k + 1}")))
        coef[f"beta{j + 1}"] = taylor.negate(t)
        a = taylor.Num(0.0)
        for k in range(n):
            a = taylor.add(a, taylor.mul(E(jac[k][j]), _S(f"A{k + 1}")))
        coef[f"A{j + 1}"] = taylor.negate(a)
    for k in range(n):
        for l in range(n):
            b = taylor.Num(0.0)
            for h in range(n):
                b = taylor.add(b, taylor.mul(E(jac[h][k]), _S(f"B{h + 1}{l + 1}")))
                b = taylor.add(b, taylor.mul(E(jac[h][l]), _S(f"B{k + 1}{h + 1}")))
            coef[f"B{k + 1}{l + 1}"] = taylor.negate(b)
    return {k: v for k, v in coef.items() if not (isinstance(v, taylor.Num) and v.value == 0)}


def apply_field(coef, expr):
    """``v(expr)`` for a prolonged field given by its coefficients."""
    out = taylor.Num(0.0)
    used = taylor.symbols(expr)
    for name, c in coef.items():
        if name in used:
            out = taylor.add(out, taylor.mul(c, taylor.differentiate(expr, name)))
    return out


def janet_d1_exprs(L, gens):
    """``K^mu = v^mu(L) + div(xi^mu) L`` as total-space Expressions."""
    expr = L.expr if isinstance(L, LagrangianDensity) else L
    out = []
    for g in gens:
        k = taylor.add(apply_field(prolonged_field(g), expr), taylor.mul(p_to_expr(g.div()), expr))
        out.append(k)
    return out


def janet_d2_exprs(K, gens, c):
    m = len(gens)
    fields = [prolonged_field(g) for g in gens]
    divs = [p_to_expr(g.div()) for g in gens]
    out = {}
    for a in range(m):
        for b in range(a + 1, m):
            e = taylor.sub(apply_field(fields[a], K[b]), apply_field(fields[b], K[a]))
            for lam in range(m):
                if c[a][b][lam]:
                    e = taylor.sub(e, taylor.mul(taylor.num(float(c[a][b][lam])), K[lam]))
            e = taylor.add(e, taylor.sub(taylor.mul(divs[a], K[b]), taylor.mul(divs[b], K[a])))
            out[a, b] = e
    return out


class MissingSlotError(KeyError):
    pass


def config_env(config, exprs, p, order=0):
    """Environment binding coordinates and every slot used by ``exprs``."""
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    used = set()
    for e in exprs:
        used |= taylor.symbols(e)
    env = taylor.coordinate_env(p, order) if order else {taylor.coord(i): float(v) for i, v in enumerate(p)}
    for name in sorted(used):
        if name in env or name in ("pi",):
            continue
        if name == "c0":
            if "c0" not in config:
                raise MissingSlotError("c0")
            env[name] = float(config["c0"])
            continue
        if name not in config:
            raise MissingSlotError(f"no assignment for slot {name!r}")
        v = config[name]
        node = taylor.parse(v, n) if isinstance(v, str) else (v if isinstance(v, taylor.Node) else taylor.num(v))
        env[name] = taylor.eval_jet(node, p, order) if order else taylor.eval_float(node, {k: env[k] for k in env if k.startswith("x")})
    return env


def janet_d1(L, gens, config, p):
    ks = janet_d1_exprs(L, gens)
    env = config_env(config, ks, p)
    return np.array([float(taylor.evaluate(k, env)) for k in ks])


def janet_d2(K, gens, c, config, p):
    m = len(gens)
    table = janet_d2_exprs(K, gens, c)
    env = config_env(config, list(table.values()), p)
    out = np.zeros((m, m))
    for (a, b), e in table.items():
        out[a, b] = float(taylor.evaluate(e, env))
        out[b, a] = -out[a, b]
    return out


# variational duals

@dataclass
class Duals:
    J: np.ndarray
    N: np.ndarray
    S: np.ndarray
    Q: np.ndarray
    dL_dalpha: float
    dL_dbeta: np.ndarray
    zeta_defect: float


def _slot_partials(L, n):
    expr = L.expr if isinstance(L, LagrangianDensity) else L
    J = [taylor.differentiate(expr, f"A{i + 1}") for i in range(n)]
    N = [[taylor.differentiate(expr, f"B{j + 1}{i + 1}") for i in range(n)] for j in range(n)]
    da = taylor.differentiate(expr, "alpha")
    db = [taylor.differentiate(expr, f"beta{i + 1}") for i in range(n)]
    return J, N, da, db


def div2(N_jet):
    """``div2(N)^j = d_i (N[j, i] - N[i, j])`` from a jet-valued ``N``."""
    dN = N_jet.grad().value  # [j, i, k] = d_k N[j, i]
    return np.einsum("jii->j", dN) - np.einsum("iji->j", dN)


def div2_pair(u, v, p, n):
    """``v div(u) - u div(v) + [u, v]`` for vector Expressions ``u``, ``v``."""
    U = jets.stack([taylor.eval_jet(taylor.parse(e, n) if isinstance(e, str) else e, p, 1) for e in u])
    V = jets.stack([taylor.eval_jet(taylor.parse(e, n) if isinstance(e, str) else e, p, 1) for e in v])
    dU, dV = U.grad().value, V.grad().value  # [k, i] = d_i u^k
    return (V.value * np.trace(dU) - U.value * np.trace(dV) + dV @ U.value - dU @ V.value)


def zeta(gam, N):
    """``zeta(N)^k = Gamma^k_ab N[a, b]`` and its symmetry defect."""
    z = np.einsum("kab,ab->k", gam, N)
    return z, float(np.abs(z - np.einsum("kba,ab->k", gam, N)).max())


def variational_duals(L, config, g, c0, p):
    n = g.dim
    p = np.asarray(p, dtype=float)
    Jx, Nx, dax, dbx = _slot_partials(L, n)
    exprs = Jx + [e for row in Nx for e in row] + [dax] + dbx
    env = config_env(config, exprs, p, order=1)
    val = lambda e: taylor.evaluate(e, env) if not isinstance(e, taylor.Num) else jets.Jet.constant(e.value, n, 1)
    as_jet = lambda v: v if isinstance(v, jets.Jet) else jets.Jet.constant(v, n, 1)
    Jj = jets.stack([as_jet(val(e)) for e in Jx])
    Nj = jets.stack([jets.stack([as_jet(val(e)) for e in row]) for row in Nx])
    G = g.jet(p, 1)
    cv.check_invertible(G.value)
    gam = cv.christoffel_jet(G).value
    divJ = float(np.trace(Jj.grad().value))
    N0 = Nj.value
    S = divJ - c0 * float(np.einsum("ji,ji->", G.value, N0))
    z, defect = zeta(gam, N0)
    Q = Jj.value + div2(Nj) + z
    return Duals(Jj.value, N0, np.array(S), Q, float(as_jet(val(dax)).value),
                 np.array([float(as_jet(val(e)).value) for e in dbx]), defect)


# integration by parts on a grid

def _grid_fields(exprs, names, grids):
    f = taylor.compile_exprs(exprs, names)
    out = f(*grids)
    return [np.broadcast_to(np.asarray(o, dtype=float), grids[0].shape) for o in out]


def ibp_imbalance(L, config, g, c0, test_alpha, test_beta, npts, box=(-1.0, 1.0)):
    """Grid value of ``int J.calA + N:calB + S alpha + Q.beta``.

    ``(calA, calB)`` is the exterior linearized operator applied to the test
    pair, ``(J, N)`` come from ``L`` on ``config`` and ``(S, Q)`` are their
    adjoint images.  The operator on the test pair uses exact derivatives;
    the adjoint side sees ``J`` and ``N`` only as grid samples and takes
    second-order central differences, so the imbalance is O(h^2).
    """
    n = g.dim
    xs = np.linspace(box[0], box[1], npts)
    h = xs[1] - xs[0]
    grids = np.meshgrid(*([xs] * n), indexing="ij")
    names = [taylor.coord(i) for i in range(n)]
    parse = lambda e: taylor.parse(e, n) if isinstance(e, str) else e

    def d(f, i):
        return np.gradient(f, h, axis=i, edge_order=2)

    # metric and Christoffel symbols from symbolic derivatives
    gex = g.expressions()
    comps = [gex[i][j] for i in range(n) for j in range(n)]
    dcomps = [taylor.differentiate(c, k + 1) for c in comps for k in range(n)]
    gv = np.array(_grid_fields(comps, names, grids)).reshape((n, n) + grids[0].shape)
    dgv = np.array(_grid_fields(dcomps, names, grids)).reshape((n, n, n) + grids[0].shape)
    gT = np.moveaxis(gv, (0, 1), (-2, -1))
    ginv = np.linalg.inv(gT)
    dgT = np.moveaxis(dgv, (0, 1, 2), (-3, -2, -1))
    low = 0.5 * (np.einsum("...dcb->...dbc", dgT) + dgT - np.einsum("...bcd->...dbc", dgT))
    gam = np.einsum("...ad,...dbc->...abc", ginv, low)

    # slot fields from the configuration, then J and N
    env_names = names + sorted(k for k in config if k != "c0")
    slot_exprs = [parse(config[k]) if isinstance(config[k], (str, taylor.Node)) else taylor.num(config[k])
                  for k in sorted(k for k in config if k != "c0")]
    slot_vals = _grid_fields(slot_exprs, names, grids) if slot_exprs else []
    Jx, Nx, _, _ = _slot_partials(L, n)
    flat = Jx + [e for row in Nx for e in row]
    f = taylor.compile_exprs(flat, env_names + ["c0"])
    vals = [np.broadcast_to(np.asarray(v, dtype=float), grids[0].shape)
            for v in f(*grids, *slot_vals, float(config.get("c0", c0)))]
    J = np.array(vals[:n])
    N = np.array(vals[n:]).reshape((n, n) + grids[0].shape)

    ta = parse(test_alpha)
    tb = [parse(e) for e in test_beta]
    a = _grid_fields([ta], names, grids)[0]
    b = np.array(_grid_fields(tb, names, grids))
    da = np.array(_grid_fields([taylor.differentiate(ta, i + 1) for i in range(n)], names, grids))
    db = np.array(_grid_fields([taylor.differentiate(e, i + 1) for e in tb for i in range(n)],
                               names, grids)).reshape((n, n) + grids[0].shape)  # [j, i] = d_i beta_j

    calA = da - b
    gamT = np.moveaxis(gam, (-3, -2, -1), (0, 1, 2))
    mu = 0.5 * np.einsum("a...,axy...->xy...", b, gamT + np.swapaxes(gamT, 1, 2)) - c0 * a * gv
    calB = db - np.swapaxes(db, 0, 1) - mu

    divJ = sum(d(J[i], i) for i in range(n))
    S = divJ - c0 * np.einsum("ji...,ji...->...", gv, N)
    dv2 = np.array([sum(d(N[j, i] - N[i, j], i) for i in range(n)) for j in range(n)])
    z = np.einsum("kab...,ab...->k...", gamT, N)
    Q = J + dv2 + z

    density = (np.einsum("i...,i...->...", J, calA) + np.einsum("ji...,ji...->...", N, calB)
               + S * a + np.einsum("i...,i...->...", Q, b))
    return float(density.sum() * h**n)


# Dirac-type residual

class HypothesisError(ValueError):
    pass


def trace_free(gen):
    return not gen.div() and all(not t for t in gen.trace_second())


def dirac_analogue_residual(L, gens, A_const, eta, c, p, restrict=False):
    """``[xi^k d_k - (eta^k xi^h_k) A_h] L - c^mu L`` per generator.

    The special case needs generators with vanishing traces; others raise
    unless ``restrict`` drops them (their entries become NaN).
    """
    expr = L.expr if isinstance(L, LagrangianDensity) else L
    n = len(A_const)
    p = np.asarray(p, dtype=float)
    extra = set(taylor.symbols(expr)) - {taylor.coord(i) for i in range(n)} - {f"A{i + 1}" for i in range(n)} - {"pi"}
    if extra:
        raise HypothesisError(f"density depends on slots other than x and A: {sorted(extra)}")
    env = {taylor.coord(i): float(v) for i, v in enumerate(p)}
    env.update({f"A{i + 1}": float(a) for i, a in enumerate(A_const)})
    Lv = taylor.eval_float(expr, env)
    dL = np.array([taylor.eval_float(taylor.differentiate(expr, i + 1), env) for i in range(n)])
    out = np.full(len(gens), np.nan)
    for mu, gen in enumerate(gens):
        if not trace_free(gen):
            if restrict:
                continue
            raise HypothesisError(f"generator {gen.label} has non-vanishing traces")
        xi = np.array([p_eval(c_, p) for c_ in gen.xi])
        jac = np.array([[p_eval(e, p) for e in row] for row in gen.jacobian()])  # [h, k] = d_k xi^h
        couple = float(np.einsum("k,hk,h->", np.asarray(eta, float), jac, np.asarray(A_const, float)))
        out[mu] = xi @ dL - couple * Lv - c[mu] * Lv
    return out
