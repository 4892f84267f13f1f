#!/usr/bin/env python3
"""
Stepsize and horizon constants of the rs-DZGT convergence analysis

Everything here is scalar arithmetic on (L0, L0_tilde, n, m, eta, rho,
beta, alpha, eps0). With s = L0 n / eta and B = (1 + 1/beta)^2 the
Lyapunov constants at a stepsize gamma (Q = alpha gamma) are

    C1 = 2 - 3 beta/2 - 2 s gamma - 8 Q s^2 gamma B
    C2 = 1 - gamma s^2/(2 beta m) - (2 s/m)(-gamma + gamma beta/2 + s gamma^2)
           - (1 + beta) rho^2 - 4 Q s^2 B - Q s^2 rho^2 (1 + beta)(1 + 1/beta)
           - (2 Q s/m) 4 s^2 gamma^2 B
    C3 = Q - 2 s gamma^2 - 3 (1 + 1/beta) gamma^2 - Q (1 + beta) rho^2 - 4 Q s^2 gamma^2 B
    C4 = (2 s gamma^2 + 6 (1 + 1/beta) gamma^2 + 4 s^2 gamma^2 B)
           * 2 m (n^2 L0^2 + 4 L0_tilde^2 n^2 eps0 / eta^2) (1 + 8 (1 + rho^2)/(1 - rho^2)^2)
    theta = (4/beta)(4 L0_tilde^2 n^2 / eta^2)

T1, T2, T3 are the positive roots that keep C1, C2, C3 nonnegative:
T1 and T3 solve quadratics in gamma directly; T2 solves c + b gamma + a gamma^2
with the cubic term of C2 bounded through gamma <= (1 - 3 beta/2) eta / (2 L0 n).

The root of C1 = 0 carries B = (1 + 1/beta)^2 in its denominator, not a single
factor (1 + 1/beta). For T2 the leading coefficient a is negative, so
(sqrt(b^2 - 4ac) - b) / 2a is the negative root; the positive one is used.
"""

import math
from dataclasses import asdict, dataclass

from errors import InvalidBeta, NegativeDiscriminant, RangeError


@dataclass(frozen=True)
class LyapunovConstants:
    gamma: float
    Q: float
    C1: float
    C2: float
    C3: float
    C4: float
    theta: float


@dataclass(frozen=True)
class TheoryConstants:
    """Analysis constants plus the admissible stepsize and horizon"""

    C1: float
    C2: float
    C3: float
    C4: float
    theta: float
    T1: float
    T2: float
    T3: float
    C0: float
    gamma_max: float
    K_min: float
    gamma: float
    K: int
    a: float
    b: float
    c: float
    d: float
    eps0: float

    def C5(self, eps_k):
        """theta * eps_k, the inexactness term of the Lyapunov descent at epoch k"""
        return self.theta * eps_k

    def as_dict(self):
        return asdict(self)


def beta_upper_bound(rho):
    """min{2/3, rho^-2 - 1}"""
    if rho == 0:
        return 2.0 / 3.0
    return min(2.0 / 3.0, rho ** -2 - 1.0)


def _check_inputs(L0, L0_tilde, n, m, eta, rho, beta, alpha, eps0):
    for field_name, value in (("L0", L0), ("L0_tilde", L0_tilde), ("n", n), ("m", m),
                              ("eta", eta), ("alpha", alpha)):
        if not value > 0:
            raise RangeError(field_name, value, "must be positive")
    if eps0 < 0:
        raise RangeError("eps0", eps0, "must be nonnegative")
    if not 0 <= rho < 1:
        raise RangeError("rho", rho, "must lie in [0, 1)")
    upper = beta_upper_bound(rho)
    if not 0 < beta < upper:
        raise InvalidBeta(f"beta = {beta!r} must lie in (0, {upper:.6g}) for rho = {rho:.6g}")


def lyapunov_constants(gamma, L0, L0_tilde, n, m, eta, rho, beta, alpha, eps0):
    """C1..C4 and theta at an arbitrary stepsize gamma (no admissibility check on gamma)"""
    _check_inputs(L0, L0_tilde, n, m, eta, rho, beta, alpha, eps0)
    s = L0 * n / eta
    inv = 1.0 + 1.0 / beta
    B = inv ** 2
    rho2 = rho ** 2
    Q = alpha * gamma

    C1 = 2.0 - 1.5 * beta - 2.0 * s * gamma - 8.0 * Q * s ** 2 * gamma * B
    C2 = (1.0
          - gamma * s ** 2 / (2.0 * beta * m)
          - (2.0 * s / m) * (-gamma + 0.5 * gamma * beta + s * gamma ** 2)
          - (1.0 + beta) * rho2
          - 4.0 * Q * s ** 2 * B
          - Q * s ** 2 * rho2 * (1.0 + beta) * inv
          - (2.0 * Q * s / m) * 4.0 * s ** 2 * gamma ** 2 * B)
    C3 = (Q
          - 2.0 * s * gamma ** 2
          - 3.0 * inv * gamma ** 2
          - Q * (1.0 + beta) * rho2
          - 4.0 * Q * s ** 2 * gamma ** 2 * B)
    noise_scale = 2.0 * m * (n ** 2 * L0 ** 2 + 4.0 * L0_tilde ** 2 * n ** 2 * eps0 / eta ** 2)
    consensus_scale = 1.0 + 8.0 * (1.0 + rho2) / (1.0 - rho2) ** 2
    C4 = (2.0 * s * gamma ** 2 + 6.0 * inv * gamma ** 2 + 4.0 * s ** 2 * gamma ** 2 * B) * noise_scale * consensus_scale
    theta = (4.0 / beta) * (4.0 * L0_tilde ** 2 * n ** 2 / eta ** 2)
    return LyapunovConstants(gamma=gamma, Q=Q, C1=C1, C2=C2, C3=C3, C4=C4, theta=theta)


def _sqrt_checked(value, label):
    if value < 0:
        raise NegativeDiscriminant(f"{label} discriminant is negative ({value:.6g})")
    return math.sqrt(value)


def theory_constants(L0, L0_tilde, n, m, eta, rho, beta, alpha, eps0, K=None):
    """
    Admissible stepsize gamma = C0 / sqrt(K) and the constants it certifies

    Args:
        L0, L0_tilde (float): Lipschitz constants of the implicit objective and of h_i in z
        n (int): upper-level dimension
        m (int): agent count
        eta (float): smoothing radius
        rho (float): ||W - (1/m) 1 1^T||_2
        beta (float): in (0, min{2/3, rho^-2 - 1})
        alpha (float): Q = alpha gamma
        eps0 (float): initial lower-level inexactness
        K (int): horizon; defaults to the smallest admissible one, max(1, ceil(K_min))

    Returns:
        TheoryConstants

    Raises:
        InvalidBeta: beta outside its admissible interval
        NegativeDiscriminant: a root defining T1, T2 or T3 is not real
    """
    _check_inputs(L0, L0_tilde, n, m, eta, rho, beta, alpha, eps0)
    s = L0 * n / eta
    inv = 1.0 + 1.0 / beta
    B = inv ** 2
    rho2 = rho ** 2
    contraction = 1.0 - 1.5 * beta

    # (sqrt(u + w) - sqrt(u)) is evaluated as w / (sqrt(u + w) + sqrt(u)) throughout
    X1 = 16.0 * alpha * (1.0 - 0.75 * beta) * B
    T1 = X1 / ((_sqrt_checked(1.0 + X1, "T1") + 1.0) * 8.0 * s * alpha * B)

    a = (-4.0 * alpha * s ** 2 * B * (2.0 * s / m) * (contraction / (2.0 * s))
         - 2.0 * s ** 2 / m)
    b = (-s ** 2 / (2.0 * beta * m)
         + s * (2.0 - beta) / m
         - 4.0 * alpha * s ** 2 * B
         - alpha * s ** 2 * rho2 * (1.0 + beta) * inv)
    c = 1.0 - (1.0 + beta) * rho2
    d = 2.0 * s + 3.0 * inv
    root = _sqrt_checked(b ** 2 - 4.0 * a * c, "T2")
    # positive root of a g^2 + b g + c (a < 0 < c)
    T2 = 2.0 * c / (root - b) if b <= 0 else (-b - root) / (2.0 * a)

    X3 = 16.0 * alpha * s ** 2 * B * (alpha - (1.0 + beta) * rho2 * alpha)
    T3 = X3 / ((_sqrt_checked(d ** 2 + X3, "T3") + d) * 8.0 * s ** 2 * alpha * B)

    C0 = min(T1, T2, T3)
    K_min = C0 ** 2 * contraction ** -2 * 4.0 * s ** 2
    gamma_max = min(C0, contraction / (2.0 * s))
    if K is None:
        K = max(1, math.ceil(K_min))
    if K < 1:
        raise RangeError("K", K, "must be >= 1")
    gamma = C0 / math.sqrt(K)

    at_gamma = lyapunov_constants(gamma, L0, L0_tilde, n, m, eta, rho, beta, alpha, eps0)
    return TheoryConstants(
        C1=at_gamma.C1,
        C2=at_gamma.C2,
        C3=at_gamma.C3,
        C4=at_gamma.C4,
        theta=at_gamma.theta,
        T1=T1,
        T2=T2,
        T3=T3,
        C0=C0,
        gamma_max=gamma_max,
        K_min=K_min,
        gamma=gamma,
        K=int(K),
        a=a,
        b=b,
        c=c,
        d=d,
        eps0=eps0,
    )
