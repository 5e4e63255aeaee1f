# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled fused posterior kernel.

Mirrors kernel/reference.py exactly; the test suite asserts agreement to
near machine precision on random points.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, lgamma, log, log1p

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093453
cdef double LOG_2 = 0.6931471805599453


cdef double _digamma(double x) noexcept nogil:
    cdef double result = 0.0
    cdef double r, r2
    while x < 6.0:
        result -= 1.0 / x
        x += 1.0
    r = 1.0 / x
    r2 = r * r
    result += log(x) - 0.5 * r \
        - r2 * (1.0 / 12.0
                - r2 * (1.0 / 120.0
                        - r2 * (1.0 / 252.0 - r2 * (1.0 / 240.0))))
    return result


cdef class FastKernel:
    cdef double[:, ::1] D
    cdef double[::1] R, log_R, ceil_R, lg_ceil_R
    cdef double[:, ::1] T, log_T, ceil_T, lg_ceil_T, att_mask
    cdef long[::1] block_start
    cdef double[::1] tau, zeta
    cdef double[:, ::1] Gamma_inv, Psi
    cdef double log_b_tau, logdet_Gamma, epsilon, iw_const
    cdef int family, use_rt, use_att, K, gd, L, M, dim
    # scratch buffers
    cdef double[::1] u, w, rbuf, grad_u, c, mu, evec, grad_c, grad_mu, giq
    cdef double[:, ::1] Lmat, Linv, Sigma_inv, S, G

    def __init__(self, data):
        self.D = np.ascontiguousarray(data.D)
        self.R = np.ascontiguousarray(data.R)
        self.log_R = np.ascontiguousarray(data.log_R)
        self.ceil_R = np.ascontiguousarray(data.ceil_R)
        self.lg_ceil_R = np.ascontiguousarray(data.lgamma_ceil_R)
        self.T = np.ascontiguousarray(data.T)
        self.log_T = np.ascontiguousarray(data.log_T)
        self.ceil_T = np.ascontiguousarray(data.ceil_T)
        self.lg_ceil_T = np.ascontiguousarray(data.lgamma_ceil_T)
        self.att_mask = np.ascontiguousarray(data.att_mask)
        self.block_start = np.ascontiguousarray(data.block_start)
        self.tau = np.ascontiguousarray(data.tau)
        self.log_b_tau = data.log_b_tau
        self.family = data.family
        self.use_rt = 1 if data.use_rt else 0
        self.use_att = 1 if data.use_att else 0
        self.K = data.k
        self.gd = data.gamma_dim
        self.L = self.D.shape[0]
        self.M = self.block_start.shape[0] - 1
        kk = max(self.K, 1)
        self.zeta = np.ascontiguousarray(data.zeta) if self.K else np.zeros(1)
        self.Gamma_inv = (
            np.ascontiguousarray(data.Gamma_inv) if self.K else np.zeros((1, 1))
        )
        self.Psi = np.ascontiguousarray(data.Psi) if self.K else np.zeros((1, 1))
        self.logdet_Gamma = data.logdet_Gamma
        self.epsilon = data.epsilon
        self.iw_const = data.iw_const
        self.dim = self.gd - 1 + (2 * self.K + self.K * (self.K + 1) // 2)
        self.u = np.zeros(self.gd)
        self.w = np.zeros(self.gd - 1)
        self.rbuf = np.zeros(self.gd - 1)
        self.grad_u = np.zeros(self.gd)
        self.c = np.zeros(kk)
        self.mu = np.zeros(kk)
        self.evec = np.zeros(kk)
        self.grad_c = np.zeros(kk)
        self.grad_mu = np.zeros(kk)
        self.giq = np.zeros(kk)
        self.Lmat = np.zeros((kk, kk))
        self.Linv = np.zeros((kk, kk))
        self.Sigma_inv = np.zeros((kk, kk))
        self.S = np.zeros((kk, kk))
        self.G = np.zeros((kk, kk))

    def __call__(self, double[::1] x):
        cdef int gd = self.gd, K = self.K, L = self.L, M = self.M
        cdef int i, j, l, m, jj, b0, b1, idx
        cdef double remaining, wi, logj, logp, s, sm, e, p_lose
        cdef double delta, sgn, d_a, d_b, d_delta, eta, eta_b, lam_t, alpha, tob
        cdef double c0, c1, c2, c3, t, lt, ct, lg
        cdef double logdet_sigma, acc, qi, suf
        out = np.zeros(self.dim)
        cdef double[::1] grad = out
        cdef double[::1] u = self.u, w = self.w, rbuf = self.rbuf
        cdef double[::1] grad_u = self.grad_u

        # --- stick-breaking transform ---
        remaining = 1.0
        logj = 0.0
        for i in range(gd - 1):
            rbuf[i] = remaining
            wi = 1.0 / (1.0 + exp(-(x[i] - log(gd - 1 - i))))
            w[i] = wi
            u[i] = remaining * wi
            logj += log(wi) + log1p(-wi) + log(remaining)
            remaining *= 1.0 - wi
        u[gd - 1] = remaining

        # --- Dirichlet prior ---
        logp = logj - self.log_b_tau
        for i in range(gd):
            logp += (self.tau[i] - 1.0) * log(u[i])
            grad_u[i] = (self.tau[i] - 1.0) / u[i]

        # --- regression block: non-centered c = mu + L e ---
        c0 = c1 = c2 = c3 = 0.0
        logdet_sigma = 0.0
        idx = gd - 1 + 2 * K
        if K > 0:
            i = 0
            for m in range(K):
                for j in range(m + 1):
                    if m == j:
                        self.Lmat[m, j] = exp(x[idx + i])
                        logdet_sigma += 2.0 * x[idx + i]
                    else:
                        self.Lmat[m, j] = x[idx + i]
                    i += 1
            for i in range(K):
                self.evec[i] = x[gd - 1 + i]
                self.mu[i] = x[gd - 1 + K + i]
                self.grad_c[i] = 0.0
            for m in range(K):
                acc = self.mu[m]
                for j in range(m + 1):
                    acc += self.Lmat[m, j] * self.evec[j]
                self.c[m] = acc
            c0 = self.c[0]
            c1 = self.c[1]
            if K == 4:
                c2 = self.c[2]
                c3 = self.c[3]

        # --- likelihood over records ---
        for l in range(L):
            s = 0.0
            for m in range(M):
                b0 = self.block_start[m]
                b1 = self.block_start[m + 1]
                sm = 0.0
                for jj in range(b0, b1):
                    sm += self.D[l, jj] * u[jj]
                s += sm
                if self.use_att and self.att_mask[l, m] > 0.0:
                    delta = fabs(sm)
                    sgn = 0.0 if sm == 0.0 else (1.0 if sm > 0.0 else -1.0)
                    t = self.T[l, m]
                    lt = self.log_T[l, m]
                    ct = self.ceil_T[l, m]
                    lg = self.lg_ceil_T[l, m]
                    d_b = 0.0
                    if self.family == 0:
                        eta = c0 * delta + c1
                        lam_t = exp(eta) * t
                        logp += eta - lam_t
                        d_a = 1.0 - lam_t
                    elif self.family == 1:
                        eta = c0 * delta + c1
                        eta_b = c2 * delta + c3
                        alpha = exp(eta)
                        tob = t * exp(-eta_b)
                        logp += (alpha - 1.0) * lt - tob - alpha * eta_b - lgamma(alpha)
                        d_a = alpha * (lt - eta_b - _digamma(alpha))
                        d_b = tob - alpha
                    else:
                        eta = c0 * delta + c1
                        lam_t = exp(eta)
                        logp += ct * eta - lam_t - lg
                        d_a = ct - lam_t
                    d_delta = d_a * c0 + d_b * c2
                    for jj in range(b0, b1):
                        grad_u[jj] += d_delta * sgn * self.D[l, jj]
                    self.grad_c[0] += d_a * delta
                    self.grad_c[1] += d_a
                    if K == 4:
                        self.grad_c[2] += d_b * delta
                        self.grad_c[3] += d_b

            # Bradley-Terry
            if s >= 0.0:
                e = exp(-s)
                logp += -log1p(e)
                p_lose = e / (1.0 + e)
            else:
                e = exp(s)
                logp += s - log1p(e)
                p_lose = 1.0 / (1.0 + e)
            for jj in range(gd):
                grad_u[jj] += p_lose * self.D[l, jj]

            if self.use_rt:
                delta = fabs(s)
                sgn = 0.0 if s == 0.0 else (1.0 if s > 0.0 else -1.0)
                t = self.R[l]
                d_b = 0.0
                if self.family == 0:
                    eta = c0 * delta + c1
                    lam_t = exp(eta) * t
                    logp += eta - lam_t
                    d_a = 1.0 - lam_t
                elif self.family == 1:
                    eta = c0 * delta + c1
                    eta_b = c2 * delta + c3
                    alpha = exp(eta)
                    tob = t * exp(-eta_b)
                    logp += (alpha - 1.0) * self.log_R[l] - tob \
                        - alpha * eta_b - lgamma(alpha)
                    d_a = alpha * (self.log_R[l] - eta_b - _digamma(alpha))
                    d_b = tob - alpha
                else:
                    eta = c0 * delta + c1
                    lam_t = exp(eta)
                    logp += self.ceil_R[l] * eta - lam_t - self.lg_ceil_R[l]
                    d_a = self.ceil_R[l] - lam_t
                d_delta = d_a * c0 + d_b * c2
                for jj in range(gd):
                    grad_u[jj] += d_delta * sgn * self.D[l, jj]
                self.grad_c[0] += d_a * delta
                self.grad_c[1] += d_a
                if K == 4:
                    self.grad_c[2] += d_b * delta
                    self.grad_c[3] += d_b

        # --- hierarchical priors on (e, mu, Sigma) ---
        if K > 0:
            # invert lower-triangular Lmat by forward substitution
            for m in range(K):
                self.Linv[m, m] = 1.0 / self.Lmat[m, m]
                for j in range(m):
                    acc = 0.0
                    for jj in range(j, m):
                        acc += self.Lmat[m, jj] * self.Linv[jj, j]
                    self.Linv[m, j] = -acc / self.Lmat[m, m]
            # Sigma_inv = Linv^T Linv
            for m in range(K):
                for j in range(K):
                    acc = 0.0
                    for jj in range(max(m, j), K):
                        acc += self.Linv[jj, m] * self.Linv[jj, j]
                    self.Sigma_inv[m, j] = acc

            # Gaussian prior on mu
            acc = 0.0
            for m in range(K):
                qi = 0.0
                for j in range(K):
                    qi += self.Gamma_inv[m, j] * (self.mu[j] - self.zeta[j])
                self.giq[m] = qi
                acc += (self.mu[m] - self.zeta[m]) * qi
                self.grad_mu[m] = -qi
            logp += -0.5 * K * LOG_2PI - 0.5 * self.logdet_Gamma - 0.5 * acc

            # standard-normal prior on the non-centered residual e
            acc = 0.0
            for m in range(K):
                acc += self.evec[m] * self.evec[m]
            logp += -0.5 * K * LOG_2PI - 0.5 * acc
            for m in range(K):
                # grad_e = Lmat^T grad_c - e
                acc = -self.evec[m]
                for j in range(m, K):
                    acc += self.Lmat[j, m] * self.grad_c[j]
                grad[gd - 1 + m] = acc
                self.grad_mu[m] += self.grad_c[m]

            # inverse-Wishart prior on Sigma
            acc = 0.0
            for m in range(K):
                for j in range(K):
                    acc += self.Psi[m, j] * self.Sigma_inv[j, m]
            logp += self.iw_const - 0.5 * (self.epsilon + K + 1) * logdet_sigma \
                - 0.5 * acc
            logp += K * LOG_2

            # S = -0.5 (eps + K + 1) Sigma_inv + 0.5 Sigma_inv Psi Sigma_inv
            for m in range(K):
                for j in range(K):
                    acc = 0.0
                    for jj in range(K):
                        qi = 0.0
                        for i in range(K):
                            qi += self.Psi[jj, i] * self.Sigma_inv[i, j]
                        acc += self.Sigma_inv[m, jj] * qi
                    self.S[m, j] = (
                        -0.5 * (self.epsilon + K + 1.0) * self.Sigma_inv[m, j]
                        + 0.5 * acc
                    )
            # G = 2 S Lmat + grad_c e^T
            for m in range(K):
                for j in range(K):
                    acc = 0.0
                    for jj in range(j, K):
                        acc += self.S[m, jj] * self.Lmat[jj, j]
                    self.G[m, j] = 2.0 * acc + self.grad_c[m] * self.evec[j]

            i = 0
            for m in range(K):
                for j in range(m + 1):
                    if m == j:
                        logp += (K - m + 1.0) * x[idx + i]
                        grad[idx + i] = self.G[m, m] * self.Lmat[m, m] + (K - m + 1.0)
                    else:
                        grad[idx + i] = self.G[m, j]
                    i += 1
            for m in range(K):
                grad[gd - 1 + K + m] = self.grad_mu[m]

        # --- chain rule back to stick-breaking coordinates ---
        suf = grad_u[gd - 1] * u[gd - 1]
        for i in range(gd - 2, -1, -1):
            grad[i] = (
                grad_u[i] * rbuf[i] * w[i] * (1.0 - w[i])
                - w[i] * suf
                + 1.0
                - (gd - i) * w[i]
            )
            suf += grad_u[i] * u[i]

        return logp, out
