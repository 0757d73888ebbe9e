"""Continuity-method solver for sigma_k(lambda(eta)) = f(X, nu).

The radial field rho is advanced by damped Newton steps inside a homotopy
that deforms a round-sphere problem (t = 0, exact solution rho = 1) into
the target data at t = 1:

    f^t(X, nu) = t f(X, nu)
                 + (1 - t) C(n,k) (n-1)^k [ |X|^-k + eps (|X|^-k - 1) ].

Admissibility of the data is checked first: the inner/outer barrier
inequalities on |X| = r1, r2 and the radial monotonicity of rho^k f.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import geometry, symm, verify
from .errors import (ConfigError, ContinuationStuck, NewtonDiverged,
                     PreconditionError)
from .newton import NewtonConfig, damped_newton

__all__ = [
    "PrescribedData", "HomotopyRun", "ConditionsReport",
    "validate_conditions", "homotopy_f", "residual", "assemble_jacobian",
    "newton_solve", "continue_to_target",
]


@dataclass
class PrescribedData:
    """Right-hand side f(X, nu) with the barrier annulus [r1, r2].

    ``f`` maps position arrays (N, n+1) and unit directions (N, n+1) to
    positive scalars (N,); first derivatives are taken by finite
    differencing, so f must tolerate near-unit directions.
    """

    f: object
    r1: float
    r2: float

    def __post_init__(self):
        if not 0.0 < self.r1 < 1.0 < self.r2:
            raise ConfigError(
                f"barrier radii must satisfy 0 < r1 < 1 < r2, "
                f"got r1={self.r1}, r2={self.r2}"
            )


@dataclass
class HomotopyRun:
    """Configuration and trace of one continuity-method solve."""

    epsilon: float = 0.01
    dt0: float = 0.1
    dt_min: float = 1e-4
    dt_max: float = 0.5
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    rho_margin: float = 0.1
    easy_iters: int = 3            # grow dt after a solve this cheap
    monitor_A: float = 2.0
    monitor_alpha: float = None    # default 2 * max|X|^2, set per state
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ConfigError("homotopy epsilon must be positive")


@dataclass
class ConditionsReport:
    """Sampled margins for the barrier and monotonicity conditions."""

    passed: bool
    inner_margin: float        # min over |X| = r1 of f - threshold (want >= 0)
    outer_margin: float        # min over |X| = r2 of threshold - f (want >= 0)
    monotonicity_margin: float  # max of d/drho(rho^k f)     (want <= 0)
    zero_margin: bool          # monotonicity holds only with equality
    samples: int

    def as_dict(self):
        return {
            "passed": self.passed,
            "inner_margin": self.inner_margin,
            "outer_margin": self.outer_margin,
            "monotonicity_margin": self.monotonicity_margin,
            "zero_margin": self.zero_margin,
            "samples": self.samples,
        }


def _sample_directions(n, samples):
    """Deterministic direction sample on S^n in R^(n+1), axes included."""
    rng = np.random.default_rng(20240817)
    dirs = rng.standard_normal((samples, n + 1))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    axes = np.vstack([np.eye(n + 1), -np.eye(n + 1)])
    return np.vstack([axes, dirs])


def validate_conditions(data, n, k, samples=64):
    """Report-only check of the barrier and monotonicity inequalities."""
    const = math.comb(n, k) * (n - 1) ** k
    dirs = _sample_directions(n, samples)

    inner = data.f(data.r1 * dirs, dirs) - const / data.r1**k
    outer = const / data.r2**k - data.f(data.r2 * dirs, dirs)

    # d/drho (rho^k f(rho w, nu)) over sample rays, central differences.
    nus = np.roll(dirs, 1, axis=0)           # decoupled direction sample
    rhos = np.linspace(data.r1, data.r2, 24)
    worst = -np.inf
    scale = 0.0
    for pair_nu in (dirs, nus):
        for r in rhos:
            dr = 1e-6 * r
            up = (r + dr) ** k * data.f((r + dr) * dirs, pair_nu)
            dn = (r - dr) ** k * data.f((r - dr) * dirs, pair_nu)
            deriv = (up - dn) / (2.0 * dr)
            worst = max(worst, float(deriv.max()))
            scale = max(scale, float(np.max(np.abs(up))))

    ztol = 1e-8 * (1.0 + scale)
    mono_ok = worst <= ztol
    inner_m = float(inner.min())
    outer_m = float(outer.min())
    passed = mono_ok and inner_m >= -1e-12 and outer_m >= -1e-12
    return ConditionsReport(
        passed=passed,
        inner_margin=inner_m,
        outer_margin=outer_m,
        monotonicity_margin=worst,
        zero_margin=bool(mono_ok and abs(worst) <= ztol),
        samples=dirs.shape[0],
    )


def homotopy_f(data, n, k, epsilon, t):
    """Blend the target data with the solvable round-sphere problem."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"homotopy parameter t={t} outside [0, 1]")
    # The bracketed factor is decreasing in rho; positivity on [r1, r2]
    # is decided at r2.
    floor = (1.0 + epsilon) / data.r2**k - epsilon
    if floor <= 0.0:
        raise ConfigError(
            f"epsilon={epsilon} too large: homotopy factor reaches "
            f"{floor:.3g} at rho={data.r2}"
        )
    const = math.comb(n, k) * (n - 1) ** k
    target = data.f

    def blended(x, nu):
        r = np.linalg.norm(x, axis=-1)
        base = const * ((1.0 + epsilon) / r**k - epsilon)
        return t * target(x, nu) + (1.0 - t) * base

    return replace(data, f=blended)


def _eval_state(grid, rho, data, k):
    """(jet, sigma_k field, f field); raises on cone exit or f <= 0."""
    jet = geometry.surface_jet(grid, rho)
    sig = geometry.sigma_k_of_eta(jet, k)
    fv = data.f(jet.X, jet.nu)
    if np.any(fv <= 0.0):
        raise PreconditionError(
            f"prescribed f must be positive; min sampled value "
            f"{float(fv.min()):.6g}"
        )
    return jet, sig, fv


def residual(grid, rho, data, k, form="raw"):
    """Per-node defect sigma_k(lambda(eta)) - f(X, nu) (or its k-th-root form)."""
    _, sig, fv = _eval_state(grid, rho, data, k)
    if form == "root":
        return sig ** (1.0 / k) - fv ** (1.0 / k)
    return sig - fv


def _fd_data_derivs(data, x, nu):
    """d_X f and d_nu f by central differences, vectorized over nodes."""
    npts, dim = x.shape
    fx = np.empty((npts, dim))
    fn = np.empty((npts, dim))
    hx = 1e-6 * (1.0 + np.linalg.norm(x, axis=1))
    hn = 1e-6
    for c in range(dim):
        e = np.zeros(dim)
        e[c] = 1.0
        fx[:, c] = (data.f(x + hx[:, None] * e, nu)
                    - data.f(x - hx[:, None] * e, nu)) / (2.0 * hx)
        fn[:, c] = (data.f(x, nu + hn * e)
                    - data.f(x, nu - hn * e)) / (2.0 * hn)
    return fx, fn


def _inv2(a):
    det = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] * a[:, 1, 0]
    inv = np.empty_like(a)
    inv[:, 0, 0] = a[:, 1, 1]
    inv[:, 1, 1] = a[:, 0, 0]
    inv[:, 0, 1] = -a[:, 0, 1]
    inv[:, 1, 0] = -a[:, 1, 0]
    return inv / det[:, None, None], det


def _jac_full(grid, jet, data, k, form):
    """Analytic Jacobian on the lat-lon grid (n = 2, k in {1, 2})."""
    raw = jet.raw
    rho = jet.rho
    rt, rp = raw["rt"], raw["rp"]
    st, ct = raw["st"], raw["ct"]
    w = raw["w"]
    g, h = raw["g"], raw["h"]
    s_tt, s_tp, s_pp = raw["s_tt"], raw["s_tp"], raw["s_pp"]
    npts = rho.size

    ginv, detg = _inv2(g)
    if k == 1:
        # sigma_1 = tr(g^-1 h)
        m_h = ginv
        m_g = -np.einsum("nab,nbc,ncd->nad", ginv, h, ginv)
    else:
        # sigma_2 = det h / det g
        adjh = np.empty_like(h)
        adjh[:, 0, 0] = h[:, 1, 1]
        adjh[:, 1, 1] = h[:, 0, 0]
        adjh[:, 0, 1] = -h[:, 0, 1]
        adjh[:, 1, 0] = -h[:, 1, 0]
        deth = h[:, 0, 0] * h[:, 1, 1] - h[:, 0, 1] * h[:, 1, 0]
        m_h = adjh / detg[:, None, None]
        m_g = -(deth / detg)[:, None, None] * ginv

    zeros = np.zeros(npts)

    def mat(a11, a12, a22):
        out = np.empty((npts, 2, 2))
        out[:, 0, 0] = a11
        out[:, 0, 1] = out[:, 1, 0] = a12
        out[:, 1, 1] = a22
        return out

    dg = {
        0: mat(2 * rho, zeros, 2 * rho * st**2),
        1: mat(2 * rt, rp, zeros),
        2: mat(zeros, rt, 2 * rp),
    }
    dT = {
        0: mat(2 * rho - s_tt, -s_tp, 2 * rho * st**2 - s_pp),
        1: mat(4 * rt, 2 * rp, -rho * st * ct),
        2: mat(zeros, 2 * rt + rho * ct / st, 4 * rp),
        3: mat(-rho, zeros, zeros),
        4: mat(zeros, -rho, zeros),
        5: mat(zeros, zeros, -rho),
    }
    dW = {0: rho / w, 1: rt / w, 2: rp / (st**2 * w)}

    coef_sig = {}
    for s in range(6):
        dh = dT[s].copy()
        if s in dW:
            dh -= h * dW[s][:, None, None]
        dh /= w[:, None, None]
        coef = np.einsum("nab,nab->n", m_h, dh)
        if s in dg:
            coef += np.einsum("nab,nab->n", m_g, dg[s])
        coef_sig[s] = coef

    # f-term: df = d_X f . dX + d_nu f . dnu, data derivatives by FD.
    fx, fn = _fd_data_derivs(data, jet.X, jet.nu)
    x, e_t, e_p = raw["x"], raw["e_t"], raw["e_p"]
    dV = {0: x, 1: -e_t, 2: -e_p / st[:, None] ** 2}
    coef_f = {}
    for s in range(3):
        dnu = (dV[s] - jet.nu * dW[s][:, None]) / w[:, None]
        coef = np.einsum("nc,nc->n", fn, dnu)
        if s == 0:
            coef += np.einsum("nc,nc->n", fx, x)
        coef_f[s] = coef

    ops = grid.ops
    dmats = [sp.identity(npts, format="csr"), ops["t"], ops["p"],
             ops["tt"], ops["tp"], ops["pp"]]
    j_sig = sum(sp.diags(coef_sig[s]) @ dmats[s] for s in range(6))
    j_f = sum(sp.diags(coef_f[s]) @ dmats[s] for s in range(3))
    return _combine_forms(j_sig, j_f, jet, data, k, form)


def _jac_axisym(grid, jet, data, k, form):
    """Analytic Jacobian for the axisymmetric profile, any n >= 2."""
    raw = jet.raw
    n = grid.n
    rho = jet.rho
    rt, rtt = raw["rt"], raw["rtt"]
    st, ct = raw["st"], raw["ct"]
    w = raw["w"]
    kap_m, kap_p = raw["kap_m"], raw["kap_p"]
    npts = rho.size

    # Sensitivities of sigma_k(eta spectrum) to the unsorted curvatures.
    kap = np.empty((npts, n))
    kap[:, 0] = kap_m
    kap[:, 1:] = kap_p[:, None]
    mu = kap.sum(axis=1, keepdims=True) - kap
    ctil = symm.sigma_k_grad_kappa_batch(mu, k)
    cm, cp = ctil[:, 0], ctil[:, 1]

    num_m = rho**2 + 2 * rt**2 - rho * rtt
    cot = ct / st
    num_p = rho - rt * cot

    dkm = {
        0: (2 * rho - rtt) / w**3 - 3 * rho * num_m / w**5,
        1: 4 * rt / w**3 - 3 * rt * num_m / w**5,
        2: -rho / w**3,
    }
    d_rw_drho = w + rho**2 / w
    d_rw_drt = rho * rt / w
    dkp = {
        0: 1.0 / (rho * w) - num_p * d_rw_drho / (rho * w) ** 2,
        1: -cot / (rho * w) - num_p * d_rw_drt / (rho * w) ** 2,
    }

    coef_sig = {
        0: cm * dkm[0] + (n - 1) * cp * dkp[0],
        1: cm * dkm[1] + (n - 1) * cp * dkp[1],
        2: cm * dkm[2],
    }

    fx, fn = _fd_data_derivs(data, jet.X, jet.nu)
    x, e_t = raw["x"], raw["e_t"]
    dW = {0: rho / w, 1: rt / w}
    dV = {0: x, 1: -e_t}
    coef_f = {}
    for s in range(2):
        dnu = (dV[s] - jet.nu * dW[s][:, None]) / w[:, None]
        coef = np.einsum("nc,nc->n", fn, dnu)
        if s == 0:
            coef += np.einsum("nc,nc->n", fx, x)
        coef_f[s] = coef

    ops = grid.ops
    dmats = [sp.identity(npts, format="csr"), ops["t"], ops["tt"]]
    j_sig = sum(sp.diags(coef_sig[s]) @ dmats[s] for s in range(3))
    j_f = sum(sp.diags(coef_f[s]) @ dmats[s] for s in range(2))
    return _combine_forms(j_sig, j_f, jet, data, k, form)


def _combine_forms(j_sig, j_f, jet, data, k, form):
    if form == "raw":
        return (j_sig - j_f).tocsr()
    sig = symm.elem_sym_all_batch(jet.eta)[:, k]
    fv = data.f(jet.X, jet.nu)
    p = 1.0 / k
    left = sp.diags(p * sig ** (p - 1.0)) @ j_sig
    right = sp.diags(p * fv ** (p - 1.0)) @ j_f
    return (left - right).tocsr()


def fd_jacobian(grid, rho, data, k, form="raw", step=1e-7):
    """Column-wise finite-difference Jacobian (correctness oracle)."""
    base = residual(grid, rho, data, k, form=form)
    npts = rho.size
    jac = np.empty((npts, npts))
    for j in range(npts):
        dr = step * (1.0 + abs(rho[j]))
        up = rho.copy()
        up[j] += dr
        dn = rho.copy()
        dn[j] -= dr
        jac[:, j] = (residual(grid, up, data, k, form=form)
                     - residual(grid, dn, data, k, form=form)) / (2.0 * dr)
    del base
    return jac


def assemble_jacobian(grid, rho, data, k, form="raw", method="analytic"):
    """Jacobian of the residual map at rho."""
    if method == "fd":
        return fd_jacobian(grid, rho, data, k, form=form)
    jet = geometry.surface_jet(grid, rho)
    if grid.mode == "full-2d":
        return _jac_full(grid, jet, data, k, form)
    return _jac_axisym(grid, jet, data, k, form)


def newton_solve(grid, rho0, data, k, config=None, rho_margin=0.1):
    """Damped Newton on the radial field with cone and range safeguards."""
    cfg = config or NewtonConfig()
    lo = data.r1 * (1.0 - rho_margin)
    hi = data.r2 * (1.0 + rho_margin)

    def res_fn(rho):
        return residual(grid, rho, data, k, form=cfg.form)

    def jac_fn(rho):
        return assemble_jacobian(grid, rho, data, k,
                                 form=cfg.form, method=cfg.jacobian)

    def check(rho):
        if np.any(rho <= 0.0):
            return "rho not positive"
        if rho.min() < lo or rho.max() > hi:
            return "rho outside barrier range"
        return None

    rho, report = damped_newton(rho0, res_fn, jac_fn, cfg,
                                candidate_check=check)
    return rho, report


def continue_to_target(grid, data, run, k):
    """March the homotopy from the round sphere at t = 0 to t = 1.

    Steps are halved on Newton failure and grown by 1.5x after cheap
    successes; monitors are recorded at every accepted t. Raises
    ContinuationStuck (with the partial trace) on step underflow and
    PreconditionError when the barrier/monotonicity report fails.
    """
    n = grid.n
    conditions = validate_conditions(data, n, k)
    if not conditions.passed:
        raise PreconditionError(
            "prescribed data fails the barrier/monotonicity conditions: "
            f"{conditions.as_dict()}"
        )
    run.trace.clear()

    rho = np.ones(grid.nnodes)
    t = 0.0
    dt = run.dt0

    def accept(t_val, rho_val, data_t, report):
        jet = geometry.surface_jet(grid, rho_val)
        monitors = verify.estimate_report(
            jet, data_t, k, A=run.monitor_A, alpha=run.monitor_alpha
        )
        run.trace.append({
            "t": t_val,
            "newton_iterations": report.iterations,
            "max_residual": report.final_residual,
            "monitors": monitors,
        })

    data0 = homotopy_f(data, n, k, run.epsilon, 0.0)
    rho, rep = newton_solve(grid, rho, data0, k,
                            config=run.newton, rho_margin=run.rho_margin)
    accept(0.0, rho, data0, rep)

    while t < 1.0:
        t_try = min(1.0, t + dt)
        data_t = homotopy_f(data, n, k, run.epsilon, t_try)
        try:
            rho_new, rep = newton_solve(grid, rho, data_t, k,
                                        config=run.newton,
                                        rho_margin=run.rho_margin)
        except NewtonDiverged:
            dt *= 0.5
            if dt < run.dt_min:
                raise ContinuationStuck(
                    f"homotopy step underflow below {run.dt_min} at t={t:.6g}",
                    trace=run.trace, last_rho=rho,
                )
            continue
        rho = rho_new
        t = t_try
        accept(t, rho, data_t, rep)
        if rep.iterations <= run.easy_iters:
            dt = min(dt * 1.5, run.dt_max)

    return rho, run
