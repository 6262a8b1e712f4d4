"""Semi-implicit Euler-Maruyama stepping of the projected gradient flow.

One time step solves the convex minimisation

    u_{n+1} = argmin_{div_h v = 0}  dt * J(v) + 1/2 ||v - r||^2,
    r = u_n + P(G(u_n) dW),

with J the potential energy of the strain and P the Helmholtz-Leray
projection: the noise is evaluated explicitly at u_n, the nonlinear
diffusion implicitly.  The minimiser is found by damped Newton with a
projected conjugate-gradient inner solve; every Newton iterate stays
exactly divergence-free because gradients and directions are projected.
The stopping quantity is the squared distance between consecutive
iterates measured through the monotonicity tensor V, which is
proportional to the remaining energy gap of the strongly convex
objective.

Each step also records the strong residual P div S(strain), the
deterministic pressure, and the running time-integrated stochastic
pressure

    K_{n+1} = K_n - B*( (I - P) G(u_n) dW ),

with B* the Bogovskii adjoint, whose temporal regularity certifies the
negative-order regularity of the stochastic pressure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import potential as pot
from .grid import (
    Grid,
    ScalarField,
    TensorField,
    VectorField,
    div_tensor_values,
    div_vec_values,
    lp_norm,
    sym_grad_values,
    w12_norm,
)
from .noise import NoiseSpec, PathRng, WienerIncrement, apply_G, sample_increment
from .projection import BogovskiiOperator, HelmholtzProjector

__all__ = [
    "SolverConfig",
    "StepReport",
    "PathTrajectory",
    "StepError",
    "Stepper",
]


class StepError(RuntimeError):
    """Newton or line-search failure inside one time step."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    T: float
    newton_tol: float = 1e-14        # threshold on ||V(eps v+) - V(eps v)||^2
    newton_max_iter: int = 60
    kappa_reg: float = 1e-7          # Hessian floor for kappa = 0, p < 2
    store_every: int = 0             # full-snapshot stride; 0 = none
    cg_tol: float = 1e-6             # inexact-Newton forcing; tighten for oracles
    cg_max_iter: int = 400

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.T <= 0.0:
            raise ValueError("T must be positive")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(steps, 1.0):
            raise ValueError("T must be an integral multiple of dt")
        if self.newton_tol <= 0.0:
            raise ValueError("newton_tol must be positive")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class StepReport:
    iterations: int
    v_distance_sq: float
    grad_norm: float
    phi_initial: float
    phi_final: float
    converged: bool


@dataclass
class PathTrajectory:
    """Scalar series and difference-norm series of one sample path."""

    times: np.ndarray
    energy: np.ndarray              # J(u(t_k))
    residual_l2: np.ndarray         # ||P div S(eps u)||_{L^2}
    velocity_l2: np.ndarray
    v_increment: np.ndarray         # ||V(eps u_k) - V(eps u_{k-1})||_{L^2}
    pressure_det_lp: np.ndarray     # ||pi_det||_{L^{p'}}
    k_sto_w12: np.ndarray           # ||K_sto||_{W^{1,2}}
    newton_iterations: np.ndarray
    diff_lags: list                 # dyadic lags in steps
    diffs: dict                     # quantity -> {lag: series of norms}
    snapshots: list = field(default_factory=list)  # (k, velocity values)
    sup_stress_lpprime: float = 0.0  # running max of ||S(eps u)||_{L^{p'}}
    error: str | None = None
    completed: bool = True

    def final_velocity(self, grid: Grid) -> VectorField:
        if not self.snapshots:
            raise ValueError("no snapshots stored")
        return VectorField(grid, self.snapshots[-1][1].copy())


def dyadic_lags(n_steps: int) -> list:
    """Dyadic step lags from 1 up to n_steps // 8 (at least lag 1)."""
    lags, m = [], 1
    while m <= max(n_steps // 8, 1):
        lags.append(m)
        m *= 2
    return lags


class _RingBuffer:
    """Fixed-depth history of field values for lagged differences."""

    def __init__(self, depth: int, shape):
        self.depth = depth
        self.buf = np.zeros((depth,) + tuple(shape))
        self.count = 0

    def push(self, values):
        self.buf[self.count % self.depth] = values
        self.count += 1

    def lagged(self, lag: int):
        """Value pushed `lag` pushes before the latest one, or None."""
        if self.count <= lag:
            return None
        return self.buf[(self.count - 1 - lag) % self.depth]


class Stepper:
    """Owns the operators for one (grid, potential, noise) configuration.

    Immutable after construction; one instance per worker is the
    intended concurrency pattern (paths are embarrassingly parallel).
    """

    def __init__(
        self,
        grid: Grid,
        params: pot.PotentialParams,
        config: SolverConfig,
        spec: NoiseSpec | None = None,
        projector: HelmholtzProjector | None = None,
        bogovskii: BogovskiiOperator | None = None,
    ):
        self.grid = grid
        self.params = params
        self.config = config
        self.spec = spec
        self.projector = projector or HelmholtzProjector(grid)
        self.bogovskii = bogovskii or BogovskiiOperator(grid)
        self._area = grid.cell_area
        self._D = grid.diff_1d
        # Hessian evaluation parameters; floored shift in the singular regime
        p, k = params.p, params.kappa
        if k == 0.0 and p < 2.0:
            self._hess_params = pot.PotentialParams(p, config.kappa_reg)
        else:
            self._hess_params = params

    # -- array-level building blocks -----------------------------------
    def _project(self, v):
        return self.projector.project_values(v)[0]

    def _energy(self, v):
        eps = sym_grad_values(self._D, v)
        norms = np.sqrt(np.sum(eps**2, axis=(0, 1)))
        return self._area * float(np.sum(pot.phi(self.params, norms)))

    def _inner(self, a, b):
        return self._area * float(np.sum(a * b))

    def _stress(self, eps):
        p, k = self.params.p, self.params.kappa
        norms = np.sqrt(np.sum(eps**2, axis=(0, 1)))
        if p >= 2.0 or k > 0.0:
            scale = (k + norms) ** (p - 2.0)
        else:
            with np.errstate(divide="ignore"):
                scale = np.where(norms > 0.0, np.where(norms > 0, norms, 1.0) ** (p - 2.0), 0.0)
        return scale[None, None] * eps

    def _vtensor(self, eps):
        p, k = self.params.p, self.params.kappa
        norms = np.sqrt(np.sum(eps**2, axis=(0, 1)))
        if p >= 2.0 or k > 0.0:
            scale = (k + norms) ** ((p - 2.0) / 2.0)
        else:
            with np.errstate(divide="ignore"):
                scale = np.where(
                    norms > 0.0, np.where(norms > 0, norms, 1.0) ** ((p - 2.0) / 2.0), 0.0
                )
        return scale[None, None] * eps

    def _grad_energy(self, v):
        """Gradient of J in the weighted L^2 product: -div S(eps v)."""
        eps = sym_grad_values(self._D, v)
        return -div_tensor_values(self._D, self._stress(eps)), eps

    def _hessian_coeffs(self, eps):
        """Nodewise coefficients of the second Gateaux derivative of J.

        D^2 J(u)[v, w] pairs eps v with eps w through the fourth-order
        tensor a1 (E:M) E + a2 M, E = eps u / |eps u|, with
        a2 = phi'(t)/t and a1 = phi''(t) - a2 at t = |eps u|.
        """
        hp = self._hess_params
        p, k = hp.p, hp.kappa
        t = np.sqrt(np.sum(eps**2, axis=(0, 1)))
        pos = t > 0.0
        tsafe = np.where(pos, t, 1.0)
        if k > 0.0:
            # phi'(t)/t = (k+t)^(p-2), with limit phi''(0) = k^(p-2) at t = 0
            a2 = (k + t) ** (p - 2.0)
            phipp = a2 * (1.0 + (p - 2.0) * t / (k + t))
        else:
            # kappa = 0 and p >= 2 (the singular regime is floored upstream)
            a2 = np.where(pos, tsafe ** (p - 2.0), 1.0 if p == 2.0 else 0.0)
            phipp = (p - 1.0) * a2
        a1 = phipp - a2
        unit = eps / tsafe[None, None]
        unit[:, :, ~pos] = 0.0
        return a1, a2, unit

    def _hessian_apply(self, a1, a2, unit, w):
        epsw = sym_grad_values(self._D, w)
        proj = np.sum(unit * epsw, axis=(0, 1))
        tens = a1[None, None] * proj[None, None] * unit + a2[None, None] * epsw
        return -div_tensor_values(self._D, tens)

    # -- public operations ---------------------------------------------
    def step(self, u_n: VectorField, dW: WienerIncrement | None):
        """One implicit step; returns (u_next, StepReport)."""
        cfg = self.config
        dt = cfg.dt
        u = u_n.values
        if dW is not None and self.spec is not None and self.spec.mode_count > 0:
            forcing = apply_G(self.spec, u_n, dW).values
            r = u + self._project(forcing)
        else:
            r = u

        def objective(v):
            diff = v - r
            return dt * self._energy(v) + 0.5 * self._inner(diff, diff)

        v = u.copy()
        phi0 = objective(v)
        phi_v = phi0
        vdist = np.inf
        grad_norm = np.inf
        converged = False
        iterations = 0
        for it in range(cfg.newton_max_iter):
            grad_j, eps = self._grad_energy(v)
            g = self._project(dt * grad_j) + (v - r)
            grad_norm = np.sqrt(self._inner(g, g))
            # rounding floor: below this scale no descent is representable
            field_scale = 1.0 + np.sqrt(self._inner(v, v))
            floor = 1e-14 * field_scale
            if grad_norm <= max(floor, 1e-14 * (1.0 + abs(phi_v))):
                converged = True
                break
            a1, a2, unit = self._hessian_coeffs(eps)

            delta = self._cg_solve(a1, a2, unit, g, dt, floor)
            predicted = -self._inner(g, delta)
            if predicted <= floor * grad_norm:
                converged = True
                break
            alpha = 1.0
            accepted = False
            while alpha > 1e-14:
                cand = v + alpha * delta
                phi_c = objective(cand)
                if phi_c <= phi_v - 1e-4 * alpha * predicted:
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                converged = True  # decrease below rounding: at the minimiser
                break
            v_old_V = self._vtensor(eps)  # eps belongs to the current v
            v = cand
            phi_v = phi_c
            iterations = it + 1
            v_new_V = self._vtensor(sym_grad_values(self._D, v))
            dv = v_new_V - v_old_V
            vdist = self._inner(dv, dv)
            if vdist <= cfg.newton_tol:
                converged = True
                break
        report = StepReport(
            iterations=iterations,
            v_distance_sq=float(vdist if np.isfinite(vdist) else 0.0),
            grad_norm=float(grad_norm),
            phi_initial=float(phi0),
            phi_final=float(phi_v),
            converged=converged,
        )
        if not converged:
            raise StepError(
                f"Newton did not converge in {cfg.newton_max_iter} iterations; "
                f"last V-distance^2 = {vdist:.3e}, gradient norm = {grad_norm:.3e}",
                report,
            )
        return VectorField(self.grid, v), report

    def _cg_solve(self, a1, a2, unit, g, dt, floor):
        """CG on  P(w + dt * Hess_J w) = -g  within the div-free subspace.

        The target residual never goes below the rounding floor of the
        operator application, directions whose curvature collapses
        (subspace pollution by round-off) abort the iteration, and the
        result is re-projected once.  The operator dominates the identity
        on the subspace, so these guards cannot mask a genuine failure.
        """
        cfg = self.config

        def apply_op(w):
            return self._project(w + dt * self._hessian_apply(a1, a2, unit, w))

        x = np.zeros_like(g)
        res = -g
        p_dir = res.copy()
        rs = self._inner(res, res)
        target = max(cfg.cg_tol**2 * rs, floor**2)
        for _ in range(cfg.cg_max_iter):
            if rs <= target:
                break
            Ap = apply_op(p_dir)
            denom = self._inner(p_dir, Ap)
            if denom <= 1e-12 * self._inner(p_dir, p_dir):
                break
            alpha = rs / denom
            x += alpha * p_dir
            res -= alpha * Ap
            rs_new = self._inner(res, res)
            p_dir = res + (rs_new / rs) * p_dir
            rs = rs_new
        return self._project(x)

    def strong_residual(self, u: VectorField) -> VectorField:
        """P div S(eps u): the divergence-free part of the stress divergence."""
        eps = sym_grad_values(self._D, u.values)
        return VectorField(self.grid, self._project(div_tensor_values(self._D, self._stress(eps))))

    def pressure_det(self, u: VectorField) -> ScalarField:
        """Deterministic pressure -B*( (I-P) div S(eps u) ); mean-free."""
        eps = sym_grad_values(self._D, u.values)
        div_s = div_tensor_values(self._D, self._stress(eps))
        grad_part = div_s - self._project(div_s)
        pi = self.bogovskii.adjoint_apply(VectorField(self.grid, grad_part))
        return ScalarField(self.grid, -pi.values)

    def accumulate_K_sto(
        self, K_prev: ScalarField, u_n: VectorField, dW: WienerIncrement
    ) -> ScalarField:
        """K_next = K_prev - B*( (I-P) G(u_n) dW ); stays mean-free."""
        if self.spec is None or self.spec.mode_count == 0:
            return K_prev
        forcing = apply_G(self.spec, u_n, dW).values
        grad_part = forcing - self._project(forcing)
        incr = self.bogovskii.adjoint_apply(VectorField(self.grid, grad_part))
        return ScalarField(self.grid, K_prev.values - incr.values)

    def run_path(self, u0: VectorField, rng: PathRng) -> PathTrajectory:
        """Integrate one sample path and collect all monitored series."""
        cfg = self.config
        n_steps = cfg.n_steps
        lags = dyadic_lags(n_steps)
        depth = max(lags) + 1
        n = self.grid.n
        p = self.params.p
        p_conj = p / (p - 1.0)

        times = np.arange(n_steps + 1) * cfg.dt
        energy = np.zeros(n_steps + 1)
        res_l2 = np.zeros(n_steps + 1)
        u_l2 = np.zeros(n_steps + 1)
        v_incr = np.zeros(n_steps + 1)
        pi_lp = np.zeros(n_steps + 1)
        k_w12 = np.zeros(n_steps + 1)
        newton_its = np.zeros(n_steps + 1)

        buffers = {
            "u": _RingBuffer(depth, (2, n, n)),
            "V": _RingBuffer(depth, (2, 2, n, n)),
            "K": _RingBuffer(depth, (n, n)),
        }
        diffs = {
            q: {m: np.zeros(max(n_steps - m + 1, 0)) for m in lags} for q in buffers
        }
        counts = {q: {m: 0 for m in lags} for q in buffers}

        sup_stress = [0.0]

        def record(k, u_vals, K_field):
            eps = sym_grad_values(self._D, u_vals)
            Vt = self._vtensor(eps)
            stress = self._stress(eps)
            div_s = div_tensor_values(self._D, stress)
            res = self._project(div_s)
            energy[k] = self._area * float(np.sum(pot.phi(self.params, np.sqrt(np.sum(eps**2, axis=(0, 1))))))
            res_l2[k] = np.sqrt(self._inner(res, res))
            u_l2[k] = np.sqrt(self._inner(u_vals, u_vals))
            pi = self.bogovskii.adjoint_apply(VectorField(self.grid, div_s - res))
            pi_lp[k] = lp_norm(ScalarField(self.grid, -pi.values), p_conj)
            k_w12[k] = w12_norm(K_field)
            sup_stress[0] = max(
                sup_stress[0], lp_norm(TensorField(self.grid, stress), p_conj)
            )
            prev_v = buffers["V"].lagged(0)
            if prev_v is not None:
                dv = Vt - prev_v
                v_incr[k] = np.sqrt(self._inner(dv, dv))
            buffers["u"].push(u_vals)
            buffers["V"].push(Vt)
            buffers["K"].push(K_field.values)
            for q, buf in buffers.items():
                latest = {"u": u_vals, "V": Vt, "K": K_field.values}[q]
                for m in lags:
                    past = buf.lagged(m)
                    if past is not None:
                        d = latest - past
                        if q == "K":
                            val = w12_norm(ScalarField(self.grid, d))
                        else:
                            val = np.sqrt(self._inner(d, d))
                        diffs[q][m][counts[q][m]] = val
                        counts[q][m] += 1

        div_u0 = lp_norm(
            ScalarField(self.grid, div_vec_values(self._D, u0.values)), 2
        )
        if div_u0 > 1e-8 * (1.0 + lp_norm(u0, 2)):
            raise ValueError(f"initial velocity is not divergence-free: {div_u0:.3e}")
        if not np.all(np.isfinite(u0.values)):
            raise ValueError("initial velocity contains non-finite entries")

        u = VectorField(self.grid, u0.values.copy())
        K = self.grid.scalar()
        snapshots = []
        error = None
        completed = True
        recorded = 1
        record(0, u.values, K)
        if cfg.store_every > 0:
            snapshots.append((0, u.values.copy()))
        J = self.spec.mode_count if self.spec is not None else 0
        for k in range(1, n_steps + 1):
            dW = sample_increment(rng, cfg.dt, J) if J > 0 else None
            try:
                if dW is not None:
                    K = self.accumulate_K_sto(K, u, dW)
                u, rep = self.step(u, dW)
            except StepError as exc:
                error = f"step {k}: {exc}"
                completed = False
                break
            if not np.all(np.isfinite(u.values)):
                error = f"step {k}: non-finite velocity"
                completed = False
                break
            newton_its[k] = rep.iterations
            record(k, u.values, K)
            recorded = k + 1
            if cfg.store_every > 0 and k % cfg.store_every == 0:
                snapshots.append((k, u.values.copy()))
        trim = recorded
        return PathTrajectory(
            times=times[:trim],
            energy=energy[:trim],
            residual_l2=res_l2[:trim],
            velocity_l2=u_l2[:trim],
            v_increment=v_incr[:trim],
            pressure_det_lp=pi_lp[:trim],
            k_sto_w12=k_w12[:trim],
            newton_iterations=newton_its[:trim],
            diff_lags=lags,
            diffs={
                q: {m: diffs[q][m][: counts[q][m]] for m in lags} for q in diffs
            },
            snapshots=snapshots,
            sup_stress_lpprime=sup_stress[0],
            error=error,
            completed=completed,
        )
