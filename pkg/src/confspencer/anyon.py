"""Charge carriers in a moving polarized medium.

Signature is (-, +, +, +) with c = 1.  Index 0 is time; spatial vectors
are plain 3-arrays.  A susceptibility is a 4-index array ``chi[a, b, c, d]``
acting on antisymmetric 2-tensors by ``P^{ab} = chi[a, b, c, d] F^{cd}``.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from . import jets, taylor
from .jets import DomainError

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])
LORENTZ_TOL = 1e-10
LEVI3 = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI3[_i, _j, _k], LEVI3[_i, _k, _j] = 1.0, -1.0


def _levi4():
    eps = np.zeros((4,) * 4)
    from itertools import permutations
    for perm in permutations(range(4)):
        inv = sum(1 for a in range(4) for b in range(a + 1, 4) if perm[a] > perm[b])
        eps[perm] = -1.0 if inv % 2 else 1.0
    return eps


LEVI4 = _levi4()


class IntegrationError(RuntimeError):
    pass


# susceptibility transport

def check_lorentz(lam, tol=LORENTZ_TOL):
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (4, 4):
        raise ValueError("Lorentz matrix must be 4x4")
    r = np.abs(lam.T @ ETA @ lam - ETA).max()
    if r > tol:
        raise ValueError(f"matrix is not a Lorentz transformation (defect {r:.3e})")
    return lam


def boost(rapidity, axis=0):
    lam = np.eye(4)
    k = axis + 1
    c, s = np.cosh(rapidity), np.sinh(rapidity)
    lam[0, 0] = lam[k, k] = c
    lam[0, k] = lam[k, 0] = s
    return lam


def spatial_rotation(angle, i, j):
    lam = np.eye(4)
    c, s = np.cos(angle), np.sin(angle)
    lam[i + 1, i + 1] = lam[j + 1, j + 1] = c
    lam[i + 1, j + 1], lam[j + 1, i + 1] = -s, s
    return lam


def apply_susceptibility(chi, F):
    return np.einsum("abcd,cd->ab", chi, F)


def transport_susceptibility(chi_prime, lam):
    """``(L x L) chi' (L x L)^-1`` so that ``P = L P' L^T`` whenever ``F = L F' L^T``."""
    lam = check_lorentz(lam)
    li = np.linalg.inv(lam)
    return np.einsum("ae,bf,efgh,gc,hd->abcd", lam, lam, np.asarray(chi_prime, float), li, li)


# polarization field

def dual(P):
    """Hodge dual ``(1/2) eps^{abcd} P_cd`` of an antisymmetric 4-tensor."""
    low = ETA @ P @ ETA
    return 0.5 * np.einsum("abcd,cd->ab", LEVI4, low)


@dataclass
class PolarizationField:
    """Antisymmetric ``P(r)`` with constant spatial ``v``; ``w`` is the spatial part of ``-P.v`` or ``*P.v``."""

    P: tuple
    v: np.ndarray
    mode: str = "direct"
    m: float = 1.0
    e: float = 1.0
    _compiled: object = field(default=None, repr=False, compare=False)

    @classmethod
    def from_strings(cls, rows, v, mode="direct", m=1.0, e=1.0):
        if mode not in ("direct", "dual"):
            raise ValueError(f"unknown mode {mode!r}")
        P = {}
        for a in range(4):
            for b in range(4):
                ea = taylor.parse(str(rows[a][b]), 3)
                eb = taylor.parse(str(rows[b][a]), 3)
                P[a, b] = ea
                if a == b and not (isinstance(ea, taylor.Num) and ea.value == 0):
                    raise ValueError("polarization tensor must have zero diagonal")
                if a < b and taylor.to_text(eb) != taylor.to_text(taylor.negate(ea)):
                    # accept numerically antisymmetric rows written independently
                    probe = np.array([0.1234, -0.2345, 0.3456])
                    env = {taylor.coord(i): probe[i] for i in range(3)}
                    if abs(taylor.eval_float(ea, env) + taylor.eval_float(eb, env)) > 1e-12:
                        raise ValueError(f"polarization tensor is not antisymmetric at ({a}, {b})")
        comps = tuple(tuple(P[a, b] for b in range(4)) for a in range(4))
        return cls(comps, np.asarray(v, dtype=float), mode, float(m), float(e))

    def w_expressions(self):
        """Spatial components of the w field as Expressions over r."""
        vt = np.concatenate([[0.0], self.v])
        out = []
        if self.mode == "direct":
            for i in range(1, 4):
                t = taylor.Num(0.0)
                for b in range(4):
                    if vt[b]:
                        t = taylor.add(t, taylor.mul(taylor.num(-ETA[b, b] * vt[b]), self.P[i][b]))
                out.append(t)
            return out
        # dual: (*P)^{ab} = (1/2) eps^{abcd} eta_cc eta_dd P^{cd}, contracted with v_b
        for i in range(1, 4):
            t = taylor.Num(0.0)
            for b in range(4):
                if not vt[b]:
                    continue
                for c in range(4):
                    for d in range(4):
                        s = LEVI4[i, b, c, d]
                        if s:
                            coef = 0.5 * s * ETA[c, c] * ETA[d, d] * ETA[b, b] * vt[b]
                            t = taylor.add(t, taylor.mul(taylor.num(coef), self.P[c][d]))
            out.append(t)
        return out

    def compiled(self):
        """Fast evaluator returning ``(w, dw)`` with ``dw[i, j] = d_j w_i``."""
        if self._compiled is None:
            we = self.w_expressions()
            dwe = [taylor.differentiate(w, j + 1) for w in we for j in range(3)]
            f = taylor.compile_exprs(we + dwe, [taylor.coord(i) for i in range(3)])

            def ev(r):
                vals = np.array([float(v) for v in f(*r)])
                return vals[:3], vals[3:].reshape(3, 3)

            self._compiled = ev
        return self._compiled

    def w(self, r):
        return self.compiled()(np.asarray(r, dtype=float))[0]

    def w_jet(self, r, order):
        return jets.stack([taylor.eval_jet(e, np.asarray(r, float), order) for e in self.w_expressions()])


def _gamma_checked(w):
    s = float(w @ w)
    if s >= 1.0:
        raise DomainError(f"|w| = {np.sqrt(s):.6g} >= 1, Lorentz factor undefined")
    return 1.0 / np.sqrt(1.0 - s)


def _spatial(u):
    u = np.asarray(u, dtype=float)
    return u[1:] if u.shape == (4,) else u


def effective_faraday(pf, u, r):
    """Effective magnetic and electric fields at ``r`` for a carrier of 4-velocity ``u``."""
    w, dw = pf.compiled()(np.asarray(r, dtype=float))
    g = _gamma_checked(w)
    j = pf.e * _spatial(u)
    B = (pf.m / pf.e**2) * (g / (1.0 + g)) * np.cross(w, dw @ j)
    return B, np.zeros(3)


def faraday_tensor(B, E=None):
    """Mixed tensor ``F^a_b`` with ``(F u)`` spatial part ``u x B`` for E = 0."""
    E = np.zeros(3) if E is None else E
    F = np.zeros((4, 4))
    F[1:, 1:] = np.einsum("ijk,k->ij", LEVI3, B)
    F[0, 1:] = E
    F[1:, 0] = E
    return F


def _beff_jet(pf, u, r, order):
    W = pf.w_jet(r, order + 1)
    _gamma_checked(np.asarray(W.value))
    dW = W.grad()
    W = W.truncate(order)
    j = pf.e * _spatial(u)
    dir_w = jets.jeinsum("ij,j->i", dW, j)
    sq = jets.jeinsum("i,i->", W, W)
    g = jets.power(1.0 - sq, -0.5)
    fac = g / (g + 1.0) * (pf.m / pf.e**2)
    cross = jets.jeinsum("ijk,j,k->i", LEVI3, W, dir_w)
    return jets.jeinsum(",i->i", fac, cross)


def monopole_density(pf, u, r):
    """Divergence over ``r`` of the effective magnetic field at fixed ``u``."""
    B = _beff_jet(pf, u, r, 1)
    return float(np.trace(B.grad().value))


# trajectories

@dataclass
class CarrierState:
    t: float
    u: np.ndarray
    r: np.ndarray

    def vector(self):
        return np.concatenate([self.r, self.u])


def minkowski_norm(u):
    return float(u @ ETA @ u)


def _rhs(pf, y):
    r, u = y[:3], y[3:]
    B, _ = effective_faraday(pf, u, r)
    du = np.zeros(4)
    du[1:] = (-pf.e / pf.m) * np.cross(u[1:], B)
    return np.concatenate([u[1:] / u[0], du])


@dataclass
class Trajectory:
    t: np.ndarray
    r: np.ndarray
    u: np.ndarray

    @property
    def end(self):
        return CarrierState(float(self.t[-1]), self.u[-1].copy(), self.r[-1].copy())


def integrate_motion(pf, initial, t_end, dt, norm_tol=1e-9, blowup=1e-3):
    """Classic RK4 in lab time; raises on leaving the domain or monitor blow-up."""
    u0 = np.asarray(initial.u, dtype=float)
    if abs(minkowski_norm(u0) + 1.0) > norm_tol:
        raise ValueError(f"initial velocity must satisfy omega(u, u) = -1, got {minkowski_norm(u0):.12g}")
    _gamma_checked(pf.w(initial.r))
    nsteps = int(round((t_end - initial.t) / dt))
    if nsteps <= 0 or abs(initial.t + nsteps * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError("t_end - t must be a positive multiple of dt")
    y = np.concatenate([np.asarray(initial.r, float), u0])
    ys = np.empty((nsteps + 1, 7))
    ys[0] = y
    n0 = minkowski_norm(u0)
    for k in range(nsteps):
        k1 = _rhs(pf, y)
        k2 = _rhs(pf, y + 0.5 * dt * k1)
        k3 = _rhs(pf, y + 0.5 * dt * k2)
        k4 = _rhs(pf, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if abs(minkowski_norm(y[3:]) - n0) > blowup:
            raise IntegrationError(f"velocity norm drifted beyond {blowup} at step {k + 1}")
        ys[k + 1] = y
    ts = initial.t + dt * np.arange(nsteps + 1)
    return Trajectory(ts, ys[:, :3], ys[:, 3:])


@dataclass
class MonitorReport:
    norm_drift: float
    wu_drift: float
    norm_ok: bool
    wu_constant: bool
    tolerance: float


def monitor_series(traj, pf):
    norms = np.array([minkowski_norm(u) for u in traj.u])
    wu = np.array([float(pf.w(r) @ u[1:]) for r, u in zip(traj.r, traj.u)])
    return norms, wu


def invariant_monitors(traj, pf, tol=1e-8):
    """Max drift of ``omega(u, u)`` and of ``w.u``; the latter is reported, not required."""
    norms, wu = monitor_series(traj, pf)
    nd = float(np.abs(norms - norms[0]).max())
    wd = float(np.abs(wu - wu[0]).max())
    return MonitorReport(nd, wd, nd <= tol, wd <= tol, tol)


def richardson_order(pf, initial, t_end, dt):
    """Observed order from endpoint differences at ``dt``, ``dt/2``, ``dt/4``."""
    ends = [integrate_motion(pf, initial, t_end, dt / 2**k).r[-1] for k in range(3)]
    coarse, fine = np.linalg.norm(ends[0] - ends[1]), np.linalg.norm(ends[1] - ends[2])
    if fine < 1e-14 * max(1.0, np.linalg.norm(ends[2])):
        # exact integration (for instance straight lines): no observable order
        return float("nan"), float("nan")
    ratio = coarse / fine
    return float(ratio), float(np.log2(ratio))


def connection_fit_residual(traj, pf):
    """Largest residual of ``du/dt + Gamma(u, u) = 0`` with a symmetric ``Gamma`` fitted per sample.

    Each sample is fitted by least squares over symmetric ``Gamma^a_{bc}``.
    The minimum-norm solution always exists for ``u != 0``, so this checks
    that the motion can be read as autoparallel transport of some connection.
    """
    worst = 0.0
    iu = np.triu_indices(4)
    for r, u in zip(traj.r, traj.u):
        B, _ = effective_faraday(pf, u, r)
        du = faraday_tensor(B) @ u * (-pf.e / pf.m)
        row = np.outer(u, u)
        row = (row + row.T - np.diag(np.diag(row)))[iu]
        for a in range(4):
            coef, *_ = np.linalg.lstsq(row[None, :], np.array([-du[a]]), rcond=None)
            worst = max(worst, abs(float(row @ coef) + du[a]))
    return worst


CSV_HEADER = ["t", "r1", "r2", "r3", "u0", "u1", "u2", "u3", "omega_uu", "w_dot_u", "monopole_density"]


def trajectory_rows(traj, pf):
    norms, wu = monitor_series(traj, pf)
    for k in range(len(traj.t)):
        dens = monopole_density(pf, traj.u[k], traj.r[k])
        yield [traj.t[k], *traj.r[k], *traj.u[k], norms[k], wu[k], dens]


def write_csv(path_or_file, traj, pf):
    def emit(fh):
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for row in trajectory_rows(traj, pf):
            wr.writerow([repr(float(v)) for v in row])

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
    else:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)


def normalized_velocity(spatial):
    s = np.asarray(spatial, dtype=float)
    return np.concatenate([[np.sqrt(1.0 + s @ s)], s])


def showcase_field(m=1.0, e=1.0):
    """A smooth polarization with non-vanishing monopole density near the origin."""
    rows = [["0", "0", "0", "0"],
            ["0", "0", "0", "(-0.3)*sin(x2) - 0.1*x3"],
            ["0", "0", "0", "(-0.2)*x1*x3 - 0.15*x1"],
            ["0", "0.3*sin(x2) + 0.1*x3", "0.2*x1*x3 + 0.15*x1", "0"]]
    return PolarizationField.from_strings(rows, [0.0, 0.0, 1.0], "direct", m, e)
