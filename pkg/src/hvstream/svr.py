"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved by pairwise coordinate descent on the 2l-variable form
(one multiplier for each side of the tube), picking the working pair with
second-order information.  Scalar inputs only: the predictor regresses
angles against normalized time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .errors import InvalidInputError

_TAU = 1e-12


@dataclass(frozen=True)
class SvrConfig:
    c: float = 100.0
    epsilon: float = 0.5
    gamma: float = 10.0
    tol: float = 1e-4
    max_iter: int = 10000

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidInputError("C must be positive")
        if not self.epsilon >= 0:
            raise InvalidInputError("epsilon must be non-negative")
        if not self.gamma > 0:
            raise InvalidInputError("gamma must be positive")
        if not self.tol > 0:
            raise InvalidInputError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidInputError("max_iter must be a positive integer")


@dataclass(frozen=True)
class SvrModel:
    support_inputs: tuple[float, ...]
    dual_coeffs: tuple[float, ...]
    bias: float
    gamma: float
    converged: bool = True
    n_iter: int = 0

    def __post_init__(self):
        if len(self.support_inputs) != len(self.dual_coeffs):
            raise InvalidInputError("support inputs and coefficients differ in length")


def rbf_kernel(x1: float, x2: float, gamma: float) -> float:
    """exp(-gamma * (x1 - x2)^2); underflows quietly to 0."""
    d = x1 - x2
    return math.exp(-gamma * d * d)


def _kernel_matrix(xs: np.ndarray, gamma: float) -> np.ndarray:
    d = xs[:, None] - xs[None, :]
    return np.exp(-gamma * d * d)


@njit(cache=True)
def _solve_dual(K, z, C, eps, tol, max_iter):
    """Pairwise coordinate descent on the tube-split dual.

    Variables ``a[0:l]`` carry sign +1 and ``a[l:2l]`` sign -1; the signed
    Hessian entry between variables s and t is
    ``sign_s * sign_t * K[s % l, t % l]``.  Returns
    (alpha, gradient, iterations, converged).
    """
    l = z.size
    n = 2 * l
    alpha = np.zeros(n)
    grad = np.empty(n)
    sign = np.empty(n)
    for t in range(l):
        grad[t] = eps - z[t]
        grad[t + l] = eps + z[t]
        sign[t] = 1.0
        sign[t + l] = -1.0

    it = 0
    converged = False
    while it < max_iter:
        # i: most violating variable that can still move up
        i = -1
        gmax = -np.inf
        for t in range(n):
            if sign[t] > 0:
                if alpha[t] < C and -grad[t] >= gmax:
                    gmax = -grad[t]
                    i = t
            elif alpha[t] > 0 and grad[t] >= gmax:
                gmax = grad[t]
                i = t
        if i < 0:
            converged = True
            break
        ki = i % l
        si = sign[i]
        # j: largest second-order decrease among variables that can move down
        j = -1
        gmax2 = -np.inf
        obj_min = np.inf
        for t in range(n):
            kt = t % l
            if sign[t] > 0:
                if alpha[t] <= 0:
                    continue
                yg = grad[t]
            else:
                if alpha[t] >= C:
                    continue
                yg = -grad[t]
            if yg >= gmax2:
                gmax2 = yg
            gd = gmax + yg
            if gd > 0:
                quad = K[ki, ki] + K[kt, kt] - 2.0 * K[ki, kt]
                if quad <= 0:
                    quad = _TAU
                obj = -(gd * gd) / quad
                if obj <= obj_min:
                    obj_min = obj
                    j = t
        if gmax + gmax2 < tol or j < 0:
            converged = True
            break

        kj = j % l
        sj = sign[j]
        qij = si * sj * K[ki, kj]
        ai_old = alpha[i]
        aj_old = alpha[j]
        if si != sj:
            q = K[ki, ki] + K[kj, kj] + 2.0 * qij
            if q <= 0:
                q = _TAU
            delta = (-grad[i] - grad[j]) / q
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            q = K[ki, ki] + K[kj, kj] - 2.0 * qij
            if q <= 0:
                q = _TAU
            delta = (grad[i] - grad[j]) / q
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total

        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(n):
            kt = t % l
            grad[t] += sign[t] * (si * K[ki, kt] * dai + sj * K[kj, kt] * daj)
        it += 1
    return alpha, grad, it, converged


def _rho(alpha, grad, sign, C) -> float:
    yg = sign * grad
    at_upper = alpha >= C
    at_lower = alpha <= 0.0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yg[free].mean())
    # no free multipliers: midpoint of the feasible interval
    ub_mask = (at_upper & (sign < 0)) | (at_lower & (sign > 0))
    lb_mask = (at_upper & (sign > 0)) | (at_lower & (sign < 0))
    ub = yg[ub_mask].min() if ub_mask.any() else np.inf
    lb = yg[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


def svr_train(xs: Sequence[float], ys: Sequence[float], cfg: SvrConfig = SvrConfig()) -> SvrModel:
    x = np.asarray(xs, dtype=float).ravel()
    z = np.asarray(ys, dtype=float).ravel()
    if x.size == 0 or x.size != z.size:
        raise InvalidInputError("need equal, non-empty xs and ys")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        raise InvalidInputError("non-finite training data")

    l = x.size
    C = float(cfg.c)
    K = _kernel_matrix(x, cfg.gamma)
    alpha, grad, it, converged = _solve_dual(K, z, C, float(cfg.epsilon), float(cfg.tol), int(cfg.max_iter))
    sign = np.concatenate([np.ones(l), -np.ones(l)])
    bias = -_rho(alpha, grad, sign, C)
    coeffs = alpha[:l] - alpha[l:]
    return SvrModel(tuple(x.tolist()), tuple(coeffs.tolist()), float(bias), float(cfg.gamma),
                    bool(converged), int(it))


def svr_predict(m: SvrModel, x: float) -> float:
    total = 0.0
    for xi, c in zip(m.support_inputs, m.dual_coeffs):
        if c != 0.0:
            total += c * rbf_kernel(xi, x, m.gamma)
    return total + m.bias


def svr_predict_many(m: SvrModel, xs: Sequence[float]) -> np.ndarray:
    """Vectorized :func:`svr_predict`."""
    sx = np.asarray(m.support_inputs)
    c = np.asarray(m.dual_coeffs)
    q = np.asarray(xs, dtype=float)
    d = q[:, None] - sx[None, :]
    return np.exp(-m.gamma * d * d) @ c + m.bias
