"""Physical model of the controlled channel reach.

Uniform steady state of the shallow-water flow, characteristic
coordinates, the two gate control laws, and the linearized relation
between the real (uncertain) gates and the nominal-value controller.

All operations are pure and work elementwise, so every function accepts
either floats or equally-shaped numpy arrays (one entry per parameter
realization).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

PARAM_NAMES = ("h_s", "B", "S_b", "C", "z_up", "xi1_0", "xi2_0", "mu_0", "mu_L")


def _first_violation(mask) -> int:
    """Index of the first True entry of a boolean scalar/array mask."""
    return int(np.argmax(np.atleast_1d(mask)))


@dataclass(frozen=True)
class PhysicalParams:
    """One realization of the nine uncertain channel parameters.

    Attributes
    ----------
    h_s : float
        Height of the fixed part of the downstream overflow gate (m).
    B : float
        Channel width (m).
    S_b : float
        Bottom slope (dimensionless).
    C : float
        Friction coefficient (dimensionless).
    z_up : float
        Water level upstream of the underflow gate (m).
    xi1_0, xi2_0 : float
        Constant-in-space initial values of the two characteristics (m/s).
    mu_0, mu_L : float
        Flow coefficients of the upstream/downstream gates.

    Fields may also be numpy arrays of a common shape, in which case the
    instance describes a batch of realizations.
    """

    h_s: float
    B: float
    S_b: float
    C: float
    z_up: float
    xi1_0: float
    xi2_0: float
    mu_0: float
    mu_L: float

    def __post_init__(self):
        for name in ("B", "C", "S_b", "mu_0", "mu_L"):
            value = getattr(self, name)
            bad = np.asarray(value) <= 0.0
            if np.any(bad):
                raise DomainError(
                    f"{name} must be strictly positive "
                    f"(violated at sample index {_first_violation(bad)})"
                )

    @classmethod
    def from_array(cls, row: np.ndarray) -> "PhysicalParams":
        """Build from a length-9 vector (or (n, 9) matrix) in canonical order."""
        row = np.asarray(row, dtype=float)
        if row.ndim == 1:
            return cls(*(float(x) for x in row))
        return cls(*(row[:, k] for k in range(len(PARAM_NAMES))))

    def to_array(self) -> np.ndarray:
        return np.asarray([getattr(self, name) for name in PARAM_NAMES], dtype=float)

    def with_values(self, **overrides) -> "PhysicalParams":
        return replace(self, **overrides)


@dataclass(frozen=True)
class Equilibrium:
    """Space-independent steady state and derived transport coefficients.

    ``lambda_1`` and ``lambda_2`` are both positive in the fluvial regime;
    the left-going wave travels with velocity ``-lambda_2``.  ``beta`` is
    the depth-to-characteristic scaling sqrt(g/H*).
    """

    H_star: float
    V_star: float
    lambda_1: float
    lambda_2: float
    gamma: float
    delta: float
    beta: float


@dataclass(frozen=True)
class NominalConfig:
    """Known constants plus the nominal parameter values the controller uses."""

    nominal: PhysicalParams
    k_0: float
    k_L: float
    Q_star: float
    g: float
    L: float
    T_star: float

    def __post_init__(self):
        if not (abs(self.k_0) < 1.0 and abs(self.k_L) < 1.0):
            raise DomainError(
                "reflection gains must satisfy |k_0| < 1 and |k_L| < 1 "
                f"(got k_0={self.k_0}, k_L={self.k_L})"
            )
        for name in ("Q_star", "g", "L", "T_star"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"{name} must be strictly positive")

    def equilibrium(self) -> Equilibrium:
        nom = self.nominal
        return compute_equilibrium(nom.S_b, nom.C, nom.B, self.Q_star, self.g)

    @classmethod
    def default(cls) -> "NominalConfig":
        """Reference configuration: 250 m reach, 75 s horizon, gains (0.6, 0.7)."""
        nominal = PhysicalParams(
            h_s=4.0, B=80.0, S_b=2e-4, C=1e-3, z_up=10.0,
            xi1_0=0.0, xi2_0=0.0, mu_0=0.65, mu_L=0.65,
        )
        return cls(nominal=nominal, k_0=0.6, k_L=0.7, Q_star=50.0, g=9.81,
                   L=250.0, T_star=75.0)


@dataclass(frozen=True)
class BoundaryCoefficients:
    """First-order boundary relations of the real channel under nominal control.

    The linearized gate conditions read

        (1 - w0) xi1(0,t) + w0 xi2(0,t) = A_coef
        -wL xi1(L,t) + (1 + wL) xi2(L,t) = C_coef

    with ``w0 = (B_coef + beta_true)/(2 beta_true)`` and
    ``wL = (D_coef - beta_true)/(2 beta_true)``.  ``beta_true`` uses the
    true equilibrium depth, ``beta_nom`` the nominal one (the coefficient
    formulas mix both, because the controller only knows nominal values).
    """

    A_coef: float
    B_coef: float
    C_coef: float
    D_coef: float
    w0: float
    wL: float
    beta_true: float
    beta_nom: float

    def effective_gains(self):
        """Reflection gains implied by the two boundary rows.

        Upstream the homogeneous row rearranges to xi1 = g0*xi2 with
        g0 = -w0/(1 - w0); downstream xi2 = gL*xi1 with gL = wL/(1 + wL).
        For true == nominal parameters these reduce to (k_0, k_L).
        """
        g0 = -self.w0 / (1.0 - self.w0)
        gL = self.wL / (1.0 + self.wL)
        return g0, gL


def _scalarize(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def compute_equilibrium(S_b, C, B, Q_star, g) -> Equilibrium:
    """Uniform steady state of the reach and its transport coefficients.

    V* = (S_b Q*/(B C))^(1/3) and H* = Q*/(B V*), which balance the
    friction and bottom slopes exactly (S_b H* = C V*^2).  The flow must
    be fluvial, g H* > V*^2, so the characteristic speeds have opposite
    signs.

    Raises
    ------
    DomainError
        On non-positive inputs or a non-fluvial steady state.
    """
    S_b, C, B, Q_star = (np.asarray(x, dtype=float) for x in (S_b, C, B, Q_star))
    for name, value in (("S_b", S_b), ("C", C), ("B", B), ("Q_star", Q_star)):
        bad = value <= 0.0
        if np.any(bad):
            raise DomainError(
                f"{name} must be strictly positive "
                f"(violated at sample index {_first_violation(bad)})"
            )
    if g <= 0.0:
        raise DomainError("g must be strictly positive")

    V_star = np.cbrt(S_b * Q_star / (B * C))
    H_star = Q_star / (B * V_star)
    bad = g * H_star <= V_star**2
    if np.any(bad):
        raise DomainError(
            "non-fluvial regime: g*H_star <= V_star**2 "
            f"(violated at sample index {_first_violation(bad)})"
        )
    celerity = np.sqrt(g * H_star)
    source = g * C * V_star**2 / H_star
    return Equilibrium(
        H_star=_scalarize(H_star),
        V_star=_scalarize(V_star),
        lambda_1=_scalarize(V_star + celerity),
        lambda_2=_scalarize(celerity - V_star),
        gamma=_scalarize(source * (1.0 / V_star - 1.0 / (2.0 * celerity))),
        delta=_scalarize(source * (1.0 / V_star + 1.0 / (2.0 * celerity))),
        beta=_scalarize(np.sqrt(g / H_star)),
    )


def check_stability(k_0, k_L, eq: Equilibrium):
    """Stability margin of the reflection gains for a given steady state.

    Returns max(|k_0| sqrt(l1 g/(l2 d)), |k_L| sqrt(l2 d/(l1 g))); values
    below 1 guarantee exponential L2 decay of the closed loop.  The margin
    is reported, never rejected, so unstable gain pairs can be studied.
    """
    ratio = np.sqrt(eq.lambda_1 * eq.gamma / (eq.lambda_2 * eq.delta))
    return _scalarize(np.maximum(np.abs(k_0) * ratio, np.abs(k_L) / ratio))


def to_characteristic(h, v, H_star, g):
    """Map depth/velocity deviations to characteristic coordinates.

    xi1 = v + h sqrt(g/H*), xi2 = v - h sqrt(g/H*).
    """
    scale = np.sqrt(g / H_star)
    return v + h * scale, v - h * scale


def from_characteristic(xi1, xi2, H_star, g):
    """Inverse of :func:`to_characteristic`."""
    scale = np.sqrt(g / H_star)
    v = 0.5 * (xi1 + xi2)
    h = (xi1 - xi2) / (2.0 * scale)
    return h, v


def _signed_two_thirds(x):
    """Real branch of x^(2/3): cbrt(x)^2, nonnegative for any real x."""
    return np.cbrt(x) ** 2


def boundary_coefficients(true_params: PhysicalParams,
                          cfg: NominalConfig) -> BoundaryCoefficients:
    """Linearize the real gate relations around the true steady state.

    The controller applies the nominal-value gate laws while the plant
    obeys the true gate equations; eliminating the gate positions gives a
    nonlinear relation v = F(H) at each end, whose value and derivative at
    the true equilibrium depth are the constants (A_coef, B_coef) upstream
    and (C_coef, D_coef) downstream.  The boundary-row weights w0, wL are
    formed with the true-depth scaling sqrt(g/H*).

    Raises
    ------
    DomainError
        If any radicand goes non-positive (upstream head ratio, downstream
        head expression), naming the offending term.
    """
    g = cfg.g
    nom = cfg.nominal
    eq_true = compute_equilibrium(true_params.S_b, true_params.C, true_params.B,
                                  cfg.Q_star, g)
    eq_nom = cfg.equilibrium()
    H_t, V_t = eq_true.H_star, eq_true.V_star
    H_n, V_n = eq_nom.H_star, eq_nom.V_star

    alpha0 = (1.0 + cfg.k_0) / (1.0 - cfg.k_0)
    alphaL = (1.0 + cfg.k_L) / (1.0 - cfg.k_L)
    beta_nom = np.sqrt(g / H_n)
    beta_true = eq_true.beta

    # upstream underflow gate: v(0) = A_coef + B_coef*h(0) + o(h)
    num = H_t - true_params.z_up
    den = H_t - nom.z_up
    bad = num * den <= 0.0
    if np.any(bad):
        raise DomainError(
            "negative radicand in upstream head ratio "
            "(H_star - z_up)/(H_star - z_up_nom); requires z_up > H_star and "
            f"z_up_nom > H_star (violated at sample index {_first_violation(bad)})"
        )
    head_root = np.sqrt(num / den)
    mu_ratio = true_params.mu_0 / nom.mu_0
    core = V_n - alpha0 * beta_nom * (H_t - H_n)
    A_coef = mu_ratio * head_root * core - V_t
    B_coef = mu_ratio * head_root * (
        -alpha0 * beta_nom
        + (true_params.z_up - nom.z_up) * core / (2.0 * num * den)
    )

    # downstream overflow gate: v(L) = C_coef + D_coef*h(L) + o(h)
    s_nom = np.sqrt(2.0 * g) * nom.mu_L
    e_h = nom.h_s - true_params.h_s
    gate_lin = V_n + alphaL * beta_nom * (H_t - H_n)
    flow_arg = H_t * gate_lin / s_nom
    flow_term = _signed_two_thirds(flow_arg)
    head_expr = e_h + flow_term
    bad = head_expr <= 0.0
    if np.any(bad):
        raise DomainError(
            "non-positive radicand in downstream head expression "
            "(h_s_nom - h_s) + ((H_star*gate_lin)/(sqrt(2g) mu_L_nom))^(2/3) "
            f"(violated at sample index {_first_violation(bad)})"
        )
    bad = flow_arg == 0.0
    if np.any(bad):
        raise DomainError(
            "zero downstream flow argument H_star*gate_lin; linearization slope "
            f"undefined (violated at sample index {_first_violation(bad)})"
        )
    C_coef = np.sqrt(2.0 * g) * true_params.mu_L * head_expr**1.5 / H_t - V_t
    flow_slope = (2.0 / 3.0) * (gate_lin + H_t * alphaL * beta_nom) \
        / (s_nom * np.cbrt(flow_arg))
    D_coef = np.sqrt(2.0 * g) * true_params.mu_L * (
        1.5 * np.sqrt(head_expr) * flow_slope * H_t - head_expr**1.5
    ) / H_t**2

    w0 = (B_coef + beta_true) / (2.0 * beta_true)
    wL = (D_coef - beta_true) / (2.0 * beta_true)
    return BoundaryCoefficients(
        A_coef=_scalarize(A_coef), B_coef=_scalarize(B_coef),
        C_coef=_scalarize(C_coef), D_coef=_scalarize(D_coef),
        w0=_scalarize(w0), wL=_scalarize(wL),
        beta_true=_scalarize(beta_true), beta_nom=_scalarize(beta_nom),
    )


def control_positions(H0, HL, cfg: NominalConfig, true_params: PhysicalParams):
    """Gate positions produced by the nominal-value control laws.

    ``H0`` and ``HL`` are the measured depths at x=0 and x=L.  The
    formulas use the nominal equilibrium, nominal upstream level and
    nominal fixed-gate height, but the physically installed flow
    coefficients mu_0 and mu_L of ``true_params``.  The downstream 2/3
    power uses the real signed branch.

    Returns the pair (U0, UL) in metres.
    """
    nom = cfg.nominal
    eq_nom = cfg.equilibrium()
    H_n, V_n = eq_nom.H_star, eq_nom.V_star
    g = cfg.g
    alpha0 = (1.0 + cfg.k_0) / (1.0 - cfg.k_0)
    alphaL = (1.0 + cfg.k_L) / (1.0 - cfg.k_L)
    beta_nom = np.sqrt(g / H_n)

    head = nom.z_up - np.asarray(H0, dtype=float)
    bad = head <= 0.0
    if np.any(bad):
        raise DomainError(
            "measured upstream depth H0 must stay below the nominal upstream "
            f"level z_up_nom (violated at sample index {_first_violation(bad)})"
        )
    U0 = H0 * (V_n - alpha0 * (H0 - H_n) * beta_nom) \
        / (true_params.mu_0 * np.sqrt(2.0 * g * head))
    UL = -_signed_two_thirds(
        HL * (V_n + alphaL * (HL - H_n) * beta_nom)
        / (np.sqrt(2.0 * g) * true_params.mu_L)
    ) + HL - nom.h_s
    return _scalarize(U0), _scalarize(UL)
