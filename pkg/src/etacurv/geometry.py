"""Sphere discretization and radial-graph geometry.

Maps a positive radial field rho on a discretized unit sphere to the
per-node geometric data of the hypersurface X = rho(x) x: metric, second
fundamental form, outward normal, support function, principal curvatures
and the spectrum of the first Newton transformation.

Two grid modes:

* ``full-2d``  -- latitude-longitude grid on S^2 (n = 2 only), nodes offset
  half a cell from the poles, longitude periodic, across-pole reflection
  for the latitude stencils.
* ``axisym-1d`` -- rho depends on the polar angle only; valid for any
  n >= 2. The meridian curvature comes from the 1-d profile expressions
  and the (n-1) parallel curvatures from the profile slope.
"""

from dataclasses import dataclass, field
from math import pi

import numpy as np
import scipy.sparse as sp
from scipy.special import gamma as gamma_fn

from .errors import DomainError, EtacurvError
from . import symm

__all__ = ["SphereGrid", "SurfaceJet", "build_grid", "surface_jet",
           "sigma_k_of_eta", "surface_csv_text"]

MODES = ("full-2d", "axisym-1d")


@dataclass
class SphereGrid:
    """Discretized S^n with differentiation stencils and quadrature weights."""

    n: int
    mode: str
    ntheta: int
    nphi: int
    theta: np.ndarray          # per-node polar angle
    phi: np.ndarray            # per-node longitude (zeros in axisym mode)
    ops: dict = field(repr=False)   # sparse differentiation matrices
    weights: np.ndarray = field(repr=False)

    @property
    def nnodes(self):
        return self.theta.size

    @property
    def spacing(self):
        """Largest angular grid spacing (the h of the error bounds)."""
        h = pi / self.ntheta
        if self.mode == "full-2d":
            h = max(h, 2.0 * pi / self.nphi)
        return h


def _sphere_area(m):
    """Surface measure of the unit sphere S^m in R^(m+1)."""
    return 2.0 * pi ** ((m + 1) / 2.0) / gamma_fn((m + 1) / 2.0)


def build_grid(n, mode, resolution):
    """Build a sphere grid of the given mode and resolution.

    ``resolution`` is (ntheta, nphi) for full-2d and an integer ntheta for
    axisym-1d. Nodes sit half a cell off the poles so no coordinate
    singularity is ever evaluated.
    """
    if n < 2:
        raise DomainError(
            "unsupported dimension n < 2: the Newton-transformation "
            "spectrum degenerates for curves"
        )
    if mode not in MODES:
        raise ValueError(f"unknown grid mode {mode!r}; expected one of {MODES}")

    if mode == "full-2d":
        if n != 2:
            raise DomainError("full-2d grids are only defined for n = 2")
        ntheta, nphi = resolution
        if ntheta < 8 or nphi < 8:
            raise ValueError("need at least 8 nodes per direction")
        if nphi % 2 != 0:
            raise ValueError("nphi must be even for the across-pole stencil")
        dth = pi / ntheta
        dph = 2.0 * pi / nphi
        th1 = (np.arange(ntheta) + 0.5) * dth
        ph1 = np.arange(nphi) * dph
        theta = np.repeat(th1, nphi)
        phi = np.tile(ph1, ntheta)
        ops = _build_ops_full(ntheta, nphi, dth, dph)
        weights = np.sin(theta) * dth * dph
    else:
        ntheta = int(resolution) if np.isscalar(resolution) else int(resolution[0])
        if ntheta < 8:
            raise ValueError("need at least 8 nodes per direction")
        nphi = 1
        dth = pi / ntheta
        theta = (np.arange(ntheta) + 0.5) * dth
        phi = np.zeros(ntheta)
        ops = _build_ops_axisym(ntheta, dth)
        weights = np.sin(theta) ** (n - 1) * dth * _sphere_area(n - 1)

    return SphereGrid(n=n, mode=mode, ntheta=ntheta, nphi=nphi,
                      theta=theta, phi=phi, ops=ops, weights=weights)


def _build_ops_full(ntheta, nphi, dth, dph):
    """Central second-order stencils on the lat-lon grid.

    The ghost row past either pole is the same latitude row with the
    longitude shifted by half a period (the meridian continued through the
    pole), so the stencils stay second order without a pole node.
    """
    half = nphi // 2

    def idx(j, i):
        i = i % nphi
        if j < 0:
            return idx(-1 - j, i + half)
        if j >= ntheta:
            return idx(2 * ntheta - 1 - j, i + half)
        return j * nphi + i

    nn = ntheta * nphi
    rows_t, cols_t, dat_t = [], [], []
    rows_tt, cols_tt, dat_tt = [], [], []
    rows_p, cols_p, dat_p = [], [], []
    rows_pp, cols_pp, dat_pp = [], [], []
    for j in range(ntheta):
        for i in range(nphi):
            r = j * nphi + i
            up, dn = idx(j - 1, i), idx(j + 1, i)
            rows_t += [r, r]
            cols_t += [dn, up]
            dat_t += [0.5 / dth, -0.5 / dth]
            rows_tt += [r, r, r]
            cols_tt += [dn, r, up]
            dat_tt += [1.0 / dth**2, -2.0 / dth**2, 1.0 / dth**2]
            le, ri = idx(j, i - 1), idx(j, i + 1)
            rows_p += [r, r]
            cols_p += [ri, le]
            dat_p += [0.5 / dph, -0.5 / dph]
            rows_pp += [r, r, r]
            cols_pp += [ri, r, le]
            dat_pp += [1.0 / dph**2, -2.0 / dph**2, 1.0 / dph**2]

    def mk(rows, cols, dat):
        return sp.csr_matrix((dat, (rows, cols)), shape=(nn, nn))

    d_t = mk(rows_t, cols_t, dat_t)
    d_p = mk(rows_p, cols_p, dat_p)
    return {
        "t": d_t,
        "p": d_p,
        "tt": mk(rows_tt, cols_tt, dat_tt),
        "pp": mk(rows_pp, cols_pp, dat_pp),
        "tp": (d_t @ d_p).tocsr(),
    }


def _build_ops_axisym(ntheta, dth):
    """1-d stencils on the meridian with even reflection at both poles."""
    rows1, cols1, dat1 = [], [], []
    rows2, cols2, dat2 = [], [], []

    def idx(j):
        if j < 0:
            return -1 - j
        if j >= ntheta:
            return 2 * ntheta - 1 - j
        return j

    for j in range(ntheta):
        up, dn = idx(j - 1), idx(j + 1)
        rows1 += [j, j]
        cols1 += [dn, up]
        dat1 += [0.5 / dth, -0.5 / dth]
        rows2 += [j, j, j]
        cols2 += [dn, j, up]
        dat2 += [1.0 / dth**2, -2.0 / dth**2, 1.0 / dth**2]

    def mk(rows, cols, dat):
        m = sp.csr_matrix((dat, (rows, cols)), shape=(ntheta, ntheta))
        m.sum_duplicates()
        return m

    return {"t": mk(rows1, cols1, dat1), "tt": mk(rows2, cols2, dat2)}


@dataclass
class SurfaceJet:
    """Per-node geometric state of the radial graph X = rho x."""

    grid: SphereGrid
    rho: np.ndarray
    X: np.ndarray              # positions in R^(n+1)
    nu: np.ndarray             # unit outward normal
    u: np.ndarray              # support function <X, nu>
    u_closed: np.ndarray       # rho^2 / sqrt(rho^2 + |grad rho|^2)
    grad_norm: np.ndarray      # |grad rho| on S^n
    kappa: np.ndarray          # principal curvatures, sorted descending
    eta: np.ndarray            # Newton-transformation spectrum, ascending
    H: np.ndarray              # sum of principal curvatures
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def n(self):
        return self.grid.n


def surface_jet(grid, rho):
    """Evaluate the full geometric jet of the radial field on the grid."""
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (grid.nnodes,):
        raise ValueError(f"rho must have shape ({grid.nnodes},)")
    if np.any(rho <= 0.0):
        raise DomainError(
            f"rho must be positive; node {int(np.argmin(rho))} has "
            f"rho = {rho.min():.6g}"
        )
    if grid.mode == "full-2d":
        return _jet_full(grid, rho)
    return _jet_axisym(grid, rho)


def _jet_full(grid, rho):
    th, ph = grid.theta, grid.phi
    st, ct = np.sin(th), np.cos(th)
    ops = grid.ops
    rt = ops["t"] @ rho
    rp = ops["p"] @ rho
    rtt = ops["tt"] @ rho
    rtp = ops["tp"] @ rho
    rpp = ops["pp"] @ rho

    # Covariant Hessian of rho on S^2 in (theta, phi) coordinates.
    s_tt = rtt
    s_tp = rtp - (ct / st) * rp
    s_pp = rpp + st * ct * rt

    gn2 = rt**2 + (rp / st) ** 2
    w = np.sqrt(rho**2 + gn2)

    nn = rho.size
    g = np.empty((nn, 2, 2))
    g[:, 0, 0] = rho**2 + rt**2
    g[:, 0, 1] = g[:, 1, 0] = rt * rp
    g[:, 1, 1] = rho**2 * st**2 + rp**2

    h = np.empty((nn, 2, 2))
    h[:, 0, 0] = (rho**2 + 2 * rt**2 - rho * s_tt) / w
    h[:, 0, 1] = h[:, 1, 0] = (2 * rt * rp - rho * s_tp) / w
    h[:, 1, 1] = (rho**2 * st**2 + 2 * rp**2 - rho * s_pp) / w

    cp, spn = np.cos(ph), np.sin(ph)
    x = np.stack([st * cp, st * spn, ct], axis=1)
    e_t = np.stack([ct * cp, ct * spn, -st], axis=1)
    e_p = np.stack([-st * spn, st * cp, np.zeros(nn)], axis=1)

    gradvec = rt[:, None] * e_t + (rp / st**2)[:, None] * e_p
    pos = rho[:, None] * x
    nu = (rho[:, None] * x - gradvec) / w[:, None]

    kappa = _principal_curvatures(g, h)
    raw = {"rt": rt, "rp": rp, "rtt": rtt, "rtp": rtp, "rpp": rpp,
           "s_tt": s_tt, "s_tp": s_tp, "s_pp": s_pp, "w": w,
           "st": st, "ct": ct, "x": x, "e_t": e_t, "e_p": e_p,
           "g": g, "h": h}
    return _finish_jet(grid, rho, pos, nu, np.sqrt(gn2), w, kappa, raw)


def _jet_axisym(grid, rho):
    th = grid.theta
    st, ct = np.sin(th), np.cos(th)
    rt = grid.ops["t"] @ rho
    rtt = grid.ops["tt"] @ rho
    w = np.sqrt(rho**2 + rt**2)

    kap_m = (rho**2 + 2 * rt**2 - rho * rtt) / w**3
    kap_p = (rho - rt * ct / st) / (rho * w)

    n = grid.n
    nn = rho.size
    kappa = np.empty((nn, n))
    kappa[:, 0] = kap_m
    kappa[:, 1:] = kap_p[:, None]

    x = np.zeros((nn, n + 1))
    x[:, 0] = st
    x[:, n] = ct
    e_t = np.zeros((nn, n + 1))
    e_t[:, 0] = ct
    e_t[:, n] = -st
    pos = rho[:, None] * x
    nu = (rho[:, None] * x - rt[:, None] * e_t) / w[:, None]

    raw = {"rt": rt, "rtt": rtt, "w": w, "st": st, "ct": ct,
           "x": x, "e_t": e_t, "kap_m": kap_m, "kap_p": kap_p}
    return _finish_jet(grid, rho, pos, nu, np.abs(rt), w, kappa, raw)


def _principal_curvatures(g, h):
    """Generalized symmetric eigenvalues of (h, g) via Cholesky reduction."""
    try:
        ell = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise EtacurvError(f"metric not positive definite: {exc}") from exc
    y = np.linalg.solve(ell, h)
    a = np.linalg.solve(ell, y.transpose(0, 2, 1))
    a = 0.5 * (a + a.transpose(0, 2, 1))
    try:
        kappa = np.linalg.eigvalsh(a)
    except np.linalg.LinAlgError as exc:
        bad = np.flatnonzero(~np.all(np.isfinite(a), axis=(1, 2)))
        node = int(bad[0]) if bad.size else -1
        raise EtacurvError(
            f"eigen-decomposition failed near node {node}: {exc}"
        ) from exc
    return kappa


def _finish_jet(grid, rho, pos, nu, grad_norm, w, kappa, raw):
    kappa = np.sort(kappa, axis=1)[:, ::-1]      # descending
    hsum = kappa.sum(axis=1)
    eta = hsum[:, None] - kappa                  # ascending, paired with kappa
    u = np.einsum("ij,ij->i", pos, nu)
    u_closed = rho**2 / w
    return SurfaceJet(grid=grid, rho=rho, X=pos, nu=nu, u=u,
                      u_closed=u_closed, grad_norm=grad_norm,
                      kappa=kappa, eta=eta, H=hsum, raw=raw)


def sigma_k_of_eta(jet, k):
    """Per-node sigma_k of the Newton-transformation spectrum.

    Raises ConeViolationError naming the first offending node when the
    spectrum leaves the admissible cone anywhere.
    """
    if not 1 <= k <= jet.n:
        raise ValueError(f"order k={k} outside [1, {jet.n}]")
    symm.require_cone_batch(jet.eta, k)
    return symm.elem_sym_all_batch(jet.eta)[:, k]


def surface_csv_text(jet, k):
    """Surface dump: one CSV row per node, fixed column order."""
    sig = sigma_k_of_eta(jet, k)
    n = jet.n
    cols = ["node"]
    if jet.grid.mode == "full-2d":
        cols += ["theta", "phi"]
    else:
        cols += ["theta"]
    cols += ["rho"]
    cols += [f"X{c}" for c in range(n + 1)]
    cols += ["u"]
    cols += [f"kappa{i + 1}" for i in range(n)]
    cols += [f"eta_lambda{i + 1}" for i in range(n)]
    cols += ["sigma_k"]

    lines = [",".join(cols)]
    fmt = "{:.17g}".format
    for p in range(jet.grid.nnodes):
        row = [str(p)]
        if jet.grid.mode == "full-2d":
            row += [fmt(jet.grid.theta[p]), fmt(jet.grid.phi[p])]
        else:
            row += [fmt(jet.grid.theta[p])]
        row += [fmt(jet.rho[p])]
        row += [fmt(v) for v in jet.X[p]]
        row += [fmt(jet.u[p])]
        row += [fmt(v) for v in jet.kappa[p]]
        row += [fmt(v) for v in jet.eta[p]]
        row += [fmt(sig[p])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
