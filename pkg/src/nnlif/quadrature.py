"""Gaussian quadrature rules used by the Galerkin assembly.

Two families are provided: Gauss-Legendre on [-1, 1] (mapped to finite
subintervals with :func:`map_affine`) and Gauss-Laguerre on [0, inf) with
weight exp(-x).  Nodes are computed by Newton iteration on the three-term
recurrences, polished to a residual below 1e-14, so the rules are
self-contained and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_NEWTON_TOL = 1e-14
_NEWTON_MAX_ITER = 200


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a Gaussian rule.

    ``kind`` is "finite-legendre" for rules on a bounded interval and
    "semi-infinite-laguerre" for rules on [0, inf) against weight exp(-x).
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    @property
    def order(self) -> int:
        return self.nodes.size

    def integrate(self, f) -> float:
        """Apply the rule to a callable (the exp(-x) weight is implicit
        for Laguerre rules)."""
        return float(np.dot(self.weights, f(self.nodes)))


def _legendre_pair(n: int, x: np.ndarray):
    """Values of (P_n, P'_n) via the recurrence, carried jointly so the
    derivative is exact at the endpoints as well."""
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    d_prev = np.zeros_like(x)
    d = np.zeros_like(x)
    for k in range(n):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        d_next = ((2 * k + 1) * (p + x * d) - k * d_prev) / (k + 1)
        p_prev, p = p, p_next
        d_prev, d = d, d_next
    return p, d


def gauss_legendre(n_q: int) -> QuadratureRule:
    """n_q-point Gauss-Legendre rule on [-1, 1].

    Exact for polynomials of degree <= 2*n_q - 1.
    """
    if n_q < 1:
        raise ValueError(f"quadrature order must be >= 1, got {n_q}")
    if n_q == 1:
        return QuadratureRule(np.zeros(1), np.full(1, 2.0), "finite-legendre")

    # Tricomi-style initial guesses; one node per index, symmetric pairs
    # converge to mirrored roots.
    i = np.arange(n_q)
    x = np.cos(np.pi * (i + 0.75) / (n_q + 0.5))
    for _ in range(_NEWTON_MAX_ITER):
        p, dp = _legendre_pair(n_q, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    else:
        raise RuntimeError(f"Legendre root iteration failed to converge for n_q={n_q}")
    p, dp = _legendre_pair(n_q, x)
    if np.max(np.abs(p)) > 1e-12:
        raise RuntimeError(f"Legendre root residual too large for n_q={n_q}")
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return QuadratureRule(x[order], w[order], "finite-legendre")


def _laguerre_weighted_pair(n: int, x: np.ndarray):
    """Values of the weighted Laguerre function exp(-x/2)*L_n(x) and of the
    previous degree, computed by the recurrence applied to the weighted form
    directly (no overflow at large x)."""
    f_prev = np.zeros_like(x)
    f = np.exp(-0.5 * x)
    for k in range(n):
        f_next = ((2 * k + 1 - x) * f - k * f_prev) / (k + 1)
        f_prev, f = f, f_next
    return f, f_prev


def gauss_laguerre(n_q: int) -> QuadratureRule:
    """n_q-point Gauss-Laguerre rule: sum w_i f(x_i) = int_0^inf exp(-x) f(x) dx
    exactly for polynomial f of degree <= 2*n_q - 1.
    """
    if n_q < 1:
        raise ValueError(f"quadrature order must be >= 1, got {n_q}")

    nodes = np.empty(n_q)
    for i in range(n_q):
        # Stroud-Secrest asymptotic guesses, marching from the smallest root.
        if i == 0:
            z = 3.0 / (1.0 + 2.4 * n_q)
        elif i == 1:
            z = nodes[0] + 15.0 / (1.0 + 2.5 * n_q)
        else:
            ai = i - 1
            z = nodes[i - 1] + ((1.0 + 2.55 * ai) / (1.9 * ai)) * (nodes[i - 1] - nodes[i - 2])
        z_arr = np.array([z])
        prev_step = np.inf
        converged = False
        for _ in range(_NEWTON_MAX_ITER):
            f, f_prev = _laguerre_weighted_pair(n_q, z_arr)
            # x * L'_n = n (L_n - L_{n-1}) carried over to the weighted form.
            df = n_q * (f - f_prev) / z_arr - 0.5 * f
            dz = f / df
            z_arr = z_arr - dz
            step = abs(dz[0])
            scale = max(1.0, abs(z_arr[0]))
            if step < _NEWTON_TOL * scale:
                converged = True
                break
            if step >= prev_step and prev_step < 1e-11 * scale:
                # increments stopped shrinking at the rounding plateau
                converged = True
                break
            prev_step = step
        if not converged:
            raise RuntimeError(f"Laguerre root iteration failed to converge for n_q={n_q}")
        nodes[i] = z_arr[0]

    f_next, _ = _laguerre_weighted_pair(n_q + 1, nodes)
    # w_i = x_i / ((n+1)^2 L_{n+1}(x_i)^2) with the exp(-x) factor folded in.
    weights = nodes * np.exp(-nodes) / ((n_q + 1) ** 2 * f_next * f_next)

    if np.any(np.diff(nodes) <= 0):
        raise RuntimeError(f"Laguerre nodes not increasing for n_q={n_q}")
    return QuadratureRule(nodes, weights, "semi-infinite-laguerre")


def map_affine(rule: QuadratureRule, a: float, b: float) -> QuadratureRule:
    """Map a reference Gauss-Legendre rule from [-1, 1] onto [a, b]."""
    if rule.kind != "finite-legendre":
        raise ValueError("only finite-legendre rules can be affinely mapped")
    if not a < b:
        raise ValueError(f"invalid interval: need a < b, got [{a}, {b}]")
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return QuadratureRule(half * rule.nodes + mid, half * rule.weights, "finite-legendre")
