"""Shifted power-law potential and the tensors derived from it.

The dissipation of the system is generated by the convex potential

    phi(t) = integral_0^t (kappa + s)^(p-2) s ds,   p > 1, kappa >= 0,

whose closed form is

    phi(t) = (kappa+t)^p / p - kappa (kappa+t)^(p-1) / (p-1)
             + kappa^p / (p (p-1)).

From phi we build the stress tensor S(xi) = (kappa+|xi|)^(p-2) xi and the
monotonicity tensor V(xi) = (kappa+|xi|)^((p-2)/2) xi.  The key algebraic
facts used throughout the package:

  * S(xi):xi = |V(xi)|^2,
  * (S(P)-S(Q)):(P-Q) is comparable to |V(P)-V(Q)|^2 with finite positive
    constants depending only on p,
  * phi(2t) = 2^p phi_{kappa/2}(t)  (shift/scaling identity),
  * phi is sandwiched between shifted p-th powers.

Matrix magnitudes |xi| are Frobenius norms everywhere (the L^2 tensor
inner product is the one used by the spatial discretisation).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PotentialParams",
    "phi",
    "phi_prime",
    "phi_second",
    "s_tensor",
    "v_tensor",
    "energy",
    "inequality_report",
    "InequalityReport",
]


@dataclass(frozen=True)
class PotentialParams:
    """Exponent p and shift kappa defining the potential."""

    p: float
    kappa: float = 0.0

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"exponent p must exceed 1, got {self.p}")
        if self.kappa < 0.0:
            raise ValueError(f"shift kappa must be nonnegative, got {self.kappa}")

    def shifted(self, extra_shift: float) -> "PotentialParams":
        """Potential with shift kappa + extra_shift (composition of shifts)."""
        return PotentialParams(self.p, self.kappa + extra_shift)


def _check_nonnegative(t):
    if np.any(np.asarray(t) < 0.0):
        raise ValueError("potential arguments must be nonnegative")


def phi(params: PotentialParams, t):
    """Potential value phi(t); vectorised over t >= 0.

    The closed form loses all digits for t << kappa (three terms of
    size kappa^p cancel down to about kappa^(p-2) t^2 / 2), so below
    t = kappa/2 the defining integral is summed as a binomial series in
    t/kappa instead; the branch switch keeps relative accuracy at a few
    ulp everywhere and makes phi(0) exactly zero.
    """
    _check_nonnegative(t)
    p, k = params.p, params.kappa
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if k == 0.0:
        out = t**p / p
        return float(out[0]) if scalar else out
    x = t / k
    small = x < 0.5
    out = np.empty_like(x)
    if np.any(~small):
        tb = t[~small]
        kt = k + tb
        val = kt**p / p - k * kt ** (p - 1.0) / (p - 1.0) + k**p / (p * (p - 1.0))
        out[~small] = np.maximum(val, 0.0)
    if np.any(small):
        # k^p * integral_0^x (1+s)^(p-2) s ds expanded binomially
        xs = x[small]
        total = np.zeros_like(xs)
        c = np.ones_like(xs)  # binom(p-2, j) x^j
        for j in range(120):
            term = c * xs * xs / (j + 2.0)
            total += term
            if np.max(np.abs(term)) <= 1e-18 * max(np.max(total), 1e-300):
                break
            c = c * xs * ((p - 2.0 - j) / (j + 1.0))
        out[small] = k**p * total
    return float(out[0]) if scalar else out


def phi_prime(params: PotentialParams, t):
    """Derivative phi'(t) = (kappa+t)^(p-2) t."""
    _check_nonnegative(t)
    p, k = params.p, params.kappa
    t = np.asarray(t, dtype=float)
    if p >= 2.0 or k > 0.0:
        out = (k + t) ** (p - 2.0) * t
    else:
        # kappa = 0, p < 2: t^(p-1), finite at t = 0 with limit 0
        out = np.where(t > 0.0, t ** (p - 1.0), 0.0)
    return out if out.ndim else float(out)


def phi_second(params: PotentialParams, t):
    """Second derivative phi''(t) = (kappa+t)^(p-2) (1 + (p-2) t/(kappa+t)).

    Singular for kappa = 0, p < 2 at t = 0; that combination raises.
    """
    _check_nonnegative(t)
    p, k = params.p, params.kappa
    t = np.asarray(t, dtype=float)
    if k == 0.0 and p < 2.0 and np.any(t == 0.0):
        raise ZeroDivisionError(
            "phi'' is singular at t = 0 for kappa = 0 and p < 2"
        )
    kt = k + t
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(kt > 0.0, t / np.where(kt > 0.0, kt, 1.0), 0.0)
        out = kt ** (p - 2.0) * (1.0 + (p - 2.0) * ratio)
    if k == 0.0:
        # limit at t = 0 is (p-1) t^(p-2): 0 for p > 2, 1 for p = 2
        out = np.where(t == 0.0, 0.0 if p > 2.0 else 1.0, out)
    return out if out.ndim else float(out)


def _frobenius(xi):
    """Frobenius magnitude over the trailing 2x2 axes."""
    return np.sqrt(np.sum(np.asarray(xi, dtype=float) ** 2, axis=(-2, -1)))


def _radial_scale(params: PotentialParams, norm, half: bool):
    """(kappa+|xi|)^(p-2) or its square root; continuous limit 0 at xi = 0."""
    p, k = params.p, params.kappa
    expo = (p - 2.0) / 2.0 if half else p - 2.0
    if k > 0.0:
        return (k + norm) ** expo
    with np.errstate(divide="ignore"):
        out = np.where(norm > 0.0, np.where(norm > 0.0, norm, 1.0) ** expo, 0.0)
    return out


def s_tensor(params: PotentialParams, xi):
    """Stress tensor S(xi) = (kappa+|xi|)^(p-2) xi, |.| Frobenius.

    xi may carry leading batch axes; the trailing two axes are the matrix.
    The limit S(0) = 0 is used when the radial factor is singular.
    """
    xi = np.asarray(xi, dtype=float)
    scale = _radial_scale(params, _frobenius(xi), half=False)
    return scale[..., None, None] * xi


def v_tensor(params: PotentialParams, xi):
    """Monotonicity tensor V(xi) = (kappa+|xi|)^((p-2)/2) xi."""
    xi = np.asarray(xi, dtype=float)
    scale = _radial_scale(params, _frobenius(xi), half=True)
    return scale[..., None, None] * xi


def energy(params: PotentialParams, eps_field, cell_area: float | None = None):
    """Dissipation energy: cell_area * sum of phi(|strain|) over nodes.

    eps_field is either a TensorField (cell_area inferred from its grid)
    or a raw array whose two leading axes are the 2x2 matrix components,
    in which case cell_area must be given.
    """
    values = getattr(eps_field, "values", eps_field)
    if cell_area is None:
        grid = getattr(eps_field, "grid", None)
        if grid is None:
            raise ValueError("cell_area required when eps_field is a raw array")
        cell_area = grid.h * grid.h
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("strain field contains non-finite entries")
    norms = np.sqrt(np.sum(values**2, axis=(0, 1)))
    return float(cell_area * np.sum(phi(params, norms)))


def _tensor_dot(a, b):
    return np.sum(a * b, axis=(-2, -1))


def _smallest_pow2_at_least(x: float) -> float:
    c = 1.0
    while c < x:
        c *= 2.0
    return c


@dataclass
class InequalityReport:
    """Sampled verification of the monotonicity inequalities."""

    params: PotentialParams
    n_samples: int
    ratio_min: float
    ratio_max: float
    n_degenerate: int
    young: dict = field(default_factory=dict)       # delta -> (C, min margin)
    shift_change: tuple = (np.nan, np.nan)          # (C, min margin) at delta=0.5
    norm_convention: str = "frobenius"


def inequality_report(
    params: PotentialParams, n_samples: int, rng_seed: int
) -> InequalityReport:
    """Sample random matrix pairs/triples and measure inequality constants.

    Reports the observed bracket of the ratio

        (S(P)-S(Q)):(P-Q) / |V(P)-V(Q)|^2

    over random 2x2 pairs spanning several magnitude decades, the smallest
    power-of-two constants C_delta for which the Young-type bound

        (S(P)-S(Q)):(R-Q) <= delta |V(P)-V(Q)|^2 + C_delta |V(R)-V(Q)|^2

    holds on every sampled triple (delta in {0.1, 0.5, 1}), and likewise
    the shift-change bound

        phi_{|P|}(t) <= C phi_{|Q|}(t) + 0.5 |V(P)-V(Q)|^2.

    Degenerate pairs (vanishing denominators) are excluded and counted.
    Brackets are measured, never asserted against theoretical constants.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(rng_seed)

    def sample_mats(count):
        mats = rng.standard_normal((count, 2, 2))
        scale = 10.0 ** rng.uniform(-2.0, 2.0, size=count)
        return mats * scale[:, None, None]

    P = sample_mats(n_samples)
    Q = sample_mats(n_samples)
    dS = s_tensor(params, P) - s_tensor(params, Q)
    dV = v_tensor(params, P) - v_tensor(params, Q)
    num = _tensor_dot(dS, P - Q)
    den = _tensor_dot(dV, dV)
    scale2 = _tensor_dot(P - Q, P - Q)
    keep = den > 1e-30 * np.maximum(scale2, 1e-300)
    n_deg = int(n_samples - keep.sum())
    ratios = num[keep] / den[keep]
    ratio_min = float(ratios.min()) if ratios.size else np.nan
    ratio_max = float(ratios.max()) if ratios.size else np.nan

    # Young-type inequality on fresh triples
    R = sample_mats(n_samples)
    dS = s_tensor(params, P) - s_tensor(params, Q)
    a = _tensor_dot(v_tensor(params, P) - v_tensor(params, Q),
                    v_tensor(params, P) - v_tensor(params, Q))
    b = _tensor_dot(v_tensor(params, R) - v_tensor(params, Q),
                    v_tensor(params, R) - v_tensor(params, Q))
    lhs = _tensor_dot(dS, R - Q)
    ok = b > 1e-30
    young = {}
    for delta in (0.1, 0.5, 1.0):
        need = (lhs[ok] - delta * a[ok]) / b[ok]
        c_delta = _smallest_pow2_at_least(max(float(need.max(initial=0.0)), 1.0))
        margin = delta * a[ok] + c_delta * b[ok] - lhs[ok]
        young[delta] = (c_delta, float(margin.min()))

    # change of shift at delta = 0.5
    t = np.abs(rng.standard_normal(n_samples)) * 10.0 ** rng.uniform(
        -2.0, 2.0, size=n_samples
    )
    shift_p = _frobenius(P)
    shift_q = _frobenius(Q)
    lhs_cs = np.array(
        [phi(params.shifted(s), tv) for s, tv in zip(shift_p, t)]
    )
    rhs_q = np.array(
        [phi(params.shifted(s), tv) for s, tv in zip(shift_q, t)]
    )
    ok = rhs_q > 1e-300
    need = (lhs_cs[ok] - 0.5 * a[ok]) / rhs_q[ok]
    c_cs = _smallest_pow2_at_least(max(float(need.max(initial=0.0)), 1.0))
    margin = c_cs * rhs_q[ok] + 0.5 * a[ok] - lhs_cs[ok]
    shift_change = (c_cs, float(margin.min()))

    return InequalityReport(
        params=params,
        n_samples=n_samples,
        ratio_min=ratio_min,
        ratio_max=ratio_max,
        n_degenerate=n_deg,
        young=young,
        shift_change=shift_change,
    )
