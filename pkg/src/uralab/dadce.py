"""Joint activity detection and channel estimation by Gaussian/Bernoulli BP.

The factor graph has one observation node per received row ``y_l`` (all M
antennas together) and one variable node per codebook column ``k`` (activity
``phi_k`` and channel ``h_k``). Messages live on the dense ``(l, k)`` edge set
and are stored as arrays with axes ``(row, column, antenna[, antenna])``.

Covariances are either full ``M x M`` matrices or, in diagonal mode, length-M
vectors of variances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LLR_CLAMP = 50.0
EDGE_EPS = 1e-12
REG = 1e-12


class SingularCovariance(np.linalg.LinAlgError):
    pass


def exclusive_sum(x: np.ndarray, axis: int) -> np.ndarray:
    """``out[i] = sum_{j != i} x[j]`` along ``axis`` without forming the total.

    Prefix/suffix sums keep a poisoned entry from leaking into its own slot.
    """
    x = np.moveaxis(x, axis, 0)
    out = np.zeros_like(x)
    if x.shape[0] > 1:
        pre = np.cumsum(x[:-1], axis=0)
        suf = np.cumsum(x[:0:-1], axis=0)[::-1]
        out[1:] += pre
        out[:-1] += suf
    return np.moveaxis(out, 0, axis)


def logistic(llr):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(llr)))


def _inv(mats: np.ndarray) -> np.ndarray:
    eye = np.eye(mats.shape[-1])
    try:
        return np.linalg.inv(mats + REG * eye)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from exc


def _herm(mats: np.ndarray) -> np.ndarray:
    return 0.5 * (mats + np.conj(np.swapaxes(mats, -1, -2)))


def _logdet(mats: np.ndarray) -> np.ndarray:
    """Log-determinant of Hermitian positive-definite matrices."""
    try:
        chol = np.linalg.cholesky(mats)
    except np.linalg.LinAlgError:
        return np.linalg.slogdet(mats)[1]
    return 2.0 * np.log(np.abs(np.diagonal(chol, axis1=-2, axis2=-1))).sum(-1)


def _chol_logdet_quad(mats: np.ndarray, vec: np.ndarray):
    """``log det S`` and ``v^H S^{-1} v`` from one Cholesky factorization."""
    chol = np.linalg.cholesky(mats + REG * np.eye(mats.shape[-1]))
    z = np.empty_like(vec)
    for i in range(vec.shape[-1]):
        acc = vec[..., i] - np.einsum("...j,...j->...", chol[..., i, :i], z[..., :i])
        z[..., i] = acc / chol[..., i, i]
    logdet = 2.0 * np.log(np.abs(np.diagonal(chol, axis1=-2, axis2=-1))).sum(-1)
    return logdet, (np.abs(z) ** 2).sum(-1)


def _quad(vec: np.ndarray, inv_mats: np.ndarray) -> np.ndarray:
    """Real part of ``v^H S v`` over the leading axes."""
    return np.einsum("...i,...ij,...j->...", np.conj(vec), inv_mats, vec).real


def gaussian_product(means, covs):
    """Mean and covariance of the normalized product of Gaussian pdfs.

    ``means`` is ``(n, M)``; ``covs`` is ``(n, M)`` (diagonal) or ``(n, M, M)``.
    """
    means = np.asarray(means, dtype=complex)
    covs = np.asarray(covs)
    if covs.ndim == means.ndim:
        prec = 1.0 / covs
        cov = 1.0 / prec.sum(0)
        return cov * (prec * means).sum(0), cov
    precs = _inv(covs)
    cov = _inv(precs.sum(0))
    return cov @ np.einsum("nij,nj->i", precs, means), cov


def l_ce(mu_dec, cov_dec, mu_pri=None, cov_pri=None) -> np.ndarray:
    """Activity evidence carried by the channel estimate itself.

    Log ratio of ``CN(mu_dec; mu_pri, cov_pri + cov_dec)`` to ``CN(mu_dec; 0, cov_dec)``.
    Works row-wise on ``(K, M)`` means with ``(K, M)`` or ``(K, M, M)`` covariances.
    """
    mu_dec = np.atleast_2d(mu_dec)
    cov_dec = np.asarray(cov_dec)
    diag = cov_dec.ndim == mu_dec.ndim
    if mu_pri is None:
        mu_pri = np.zeros_like(mu_dec)
    if cov_pri is None:
        cov_pri = np.ones(mu_dec.shape) if diag else np.broadcast_to(np.eye(mu_dec.shape[-1]), cov_dec.shape)
    diff = mu_dec - mu_pri
    if diag:
        tot = cov_pri + cov_dec
        return (np.log(cov_dec).sum(-1) - np.log(tot).sum(-1)
                + (np.abs(mu_dec) ** 2 / cov_dec).sum(-1) - (np.abs(diff) ** 2 / tot).sum(-1))
    tot = cov_pri + cov_dec
    return (_logdet(cov_dec) - _logdet(tot)
            + _quad(mu_dec, _inv(cov_dec)) - _quad(diff, _inv(tot)))


@dataclass
class DadCeResult:
    mu_dec: np.ndarray       # (K, M)
    sigma_dec: np.ndarray    # (K, M) or (K, M, M)
    l_dec: np.ndarray        # (K,)
    l_sn_total: np.ndarray   # (K,) sum of incoming observation LLRs
    l_ce: np.ndarray         # (K,)
    l0: float
    iterations: int

    @property
    def active(self) -> np.ndarray:
        return self.l_dec > 0

    @property
    def active_set(self) -> np.ndarray:
        """0-based codebook columns declared active."""
        return np.flatnonzero(self.active)

    @property
    def h_hat(self) -> np.ndarray:
        return self.active[:, None] * self.mu_dec


class DadCeGraph:
    """Flooding-schedule BP on the dense activity/channel factor graph.

    Parameters
    ----------
    A : (L, K) complex
        Effective sensing matrix (transmit power folded in).
    y : (L, M) complex
        Observations.
    noise : float or (L, M) array
        Noise variance per row and antenna.
    pa : float
        Prior activity probability (ignored when ``fixed_activity``).
    diag : bool
        Keep only covariance diagonals.
    fixed_activity : bool
        Treat every column as active and skip the Bernoulli messages.
    prior, output_prior : (mean, cov) pairs, optional
        Channel prior used while iterating and in the final output. Defaults
        to ``CN(0, I)`` for both.
    damping : float
        Weight of the previous VN message in each update.
    llr_warmup : int
        Gaussian-only iterations before observation LLRs are formed. While the
        VN channel messages still equal the prior, every row integrates the
        same unknown channel out on its own and their sum overcounts.
    """

    def __init__(self, A, y, noise, pa=0.5, diag=True, fixed_activity=False,
                 prior=None, output_prior=None, damping=0.0, llr_warmup=1):
        self.A = np.asarray(A, dtype=complex)
        self.y = np.asarray(y, dtype=complex)
        L, K = self.A.shape
        if self.y.shape[0] != L:
            raise ValueError(f"y has {self.y.shape[0]} rows, A has {L}")
        M = self.y.shape[1]
        self.L, self.K, self.M = L, K, M
        self.noise = np.broadcast_to(np.asarray(noise, dtype=float), (L, M))
        self.diag = diag
        self.fixed = fixed_activity
        self.damping = damping
        self.llr_warmup = llr_warmup
        self.l0 = 0.0 if fixed_activity else float(np.log(pa / (1.0 - pa)))
        self.edge = np.abs(self.A) > EDGE_EPS
        self.dense = bool(self.edge.all())
        self.abs2 = np.abs(self.A) ** 2

        self.mu_pri, self.cov_pri = self._prior(prior)
        self.out_mu_pri, self.out_cov_pri = self._prior(output_prior)
        self.mu_vn = np.broadcast_to(self.mu_pri, (L, K, M)).copy()
        self.cov_vn = np.broadcast_to(self.cov_pri, (L,) + self.cov_pri.shape).copy()
        self.llr_vn = np.full((L, K), self.l0)
        self.mu_sn = np.zeros((L, K, M), dtype=complex)
        self.prec_sn = np.zeros((L, K, M) if diag else (L, K, M, M), dtype=float if diag else complex)
        self.eta_sn = np.zeros((L, K, M), dtype=complex)
        self.llr_sn = np.zeros((L, K))
        self.iterations = 0

    def _prior(self, prior):
        K, M = self.K, self.M
        if prior is None:
            mu = np.zeros((K, M), dtype=complex)
            cov = np.ones((K, M)) if self.diag else np.broadcast_to(np.eye(M), (K, M, M)).astype(complex)
            return mu, cov
        mu, cov = prior
        mu = np.broadcast_to(np.asarray(mu, dtype=complex), (K, M)).copy()
        cov = np.asarray(cov)
        if self.diag and cov.ndim == 3:
            cov = np.real(np.diagonal(cov, axis1=-2, axis2=-1))
        elif not self.diag and cov.ndim == 2:
            cov = cov[..., None] * np.eye(M)
        cov = np.broadcast_to(cov, (K, M) if self.diag else (K, M, M)).copy()
        return mu, cov

    # ------------------------------------------------------------------
    @property
    def p_vn(self) -> np.ndarray:
        if self.fixed:
            return np.ones((self.L, self.K))
        return logistic(self.llr_vn)

    def interference_stats(self):
        """Mean ``(L, K, M)`` and covariance of everything except column k at row l.

        Row totals minus the own term; every term is PSD so the difference
        stays well conditioned once the noise floor is added back.
        """
        p = self.p_vn
        q = 1.0 - p
        mean_terms = (self.A * p)[..., None] * self.mu_vn
        mu_z = mean_terms.sum(1, keepdims=True) - mean_terms
        w = self.abs2 * p
        if self.diag:
            terms = w[..., None] * (self.cov_vn + q[..., None] * (self.mu_vn.real ** 2 + self.mu_vn.imag ** 2))
            cov_z = terms.sum(1, keepdims=True) - terms
            return mu_z, np.maximum(cov_z, 0.0) + self.noise[:, None, :]
        outer = self.mu_vn[..., :, None] * np.conj(self.mu_vn[..., None, :])
        terms = w[..., None, None] * (self.cov_vn + q[..., None, None] * outer)
        cov_z = terms.sum(1, keepdims=True) - terms
        idx = np.arange(self.M)
        cov_z[..., idx, idx] = np.maximum(cov_z[..., idx, idx].real, 0.0) + self.noise[:, None, :]
        return mu_z, cov_z

    def _on_edges(self, x, edge):
        return x if self.dense else np.where(edge, x, 0.0)

    def sn_update(self):
        mu_z, cov_z = self.interference_stats()
        A = self.A[..., None]
        resid = self.y[:, None, :] - mu_z
        edge = self.edge[..., None]
        safe_A = A if self.dense else np.where(edge, A, 1.0)
        self.mu_sn = self._on_edges(resid / safe_A, edge)
        if self.diag:
            inv_z = 1.0 / cov_z
            self.prec_sn = self._on_edges(self.abs2[..., None] * inv_z, edge)
            self.eta_sn = self._on_edges(np.conj(A) * resid * inv_z, edge)
        else:
            inv_z = _inv(cov_z)
            self.prec_sn = self._on_edges(self.abs2[..., None, None] * inv_z, edge[..., None])
            self.eta_sn = self._on_edges(np.conj(A) * np.einsum("lkij,lkj->lki", inv_z, resid), edge)
        if self.fixed or self.iterations < self.llr_warmup:
            return
        resid1 = resid - A * self.mu_vn
        if self.diag:
            cov1 = self.abs2[..., None] * self.cov_vn + cov_z
            r0 = resid.real ** 2 + resid.imag ** 2
            r1 = resid1.real ** 2 + resid1.imag ** 2
            llr = (np.log(cov_z / cov1) + r0 * inv_z - r1 / cov1).sum(-1)
        else:
            cov1 = self.abs2[..., None, None] * self.cov_vn + cov_z
            logdet1, quad1 = _chol_logdet_quad(cov1, resid1)
            llr = _logdet(cov_z) - logdet1 + _quad(resid, inv_z) - quad1
        self.llr_sn = np.clip(self._on_edges(llr, self.edge), -LLR_CLAMP, LLR_CLAMP)

    def _combine(self, prec_sum, eta_sum, mu_pri, cov_pri):
        if self.diag:
            prec = prec_sum + 1.0 / cov_pri
            cov = 1.0 / prec
            return cov * (eta_sum + mu_pri / cov_pri), cov
        prior_prec = _inv(cov_pri)
        prec = prec_sum + prior_prec
        cov = _herm(_inv(prec))
        eta = eta_sum + np.einsum("...ij,...j->...i", prior_prec, mu_pri)
        return np.einsum("...ij,...j->...i", cov, eta), cov

    def vn_update(self):
        prec_ex = exclusive_sum(self.prec_sn, axis=0)
        eta_ex = exclusive_sum(self.eta_sn, axis=0)
        mu, cov = self._combine(prec_ex, eta_ex, self.mu_pri, self.cov_pri)
        d = self.damping
        if d:
            mu = d * self.mu_vn + (1 - d) * mu
            cov = d * self.cov_vn + (1 - d) * cov
        self.mu_vn, self.cov_vn = mu, cov
        if not self.fixed:
            llr = self.l0 + exclusive_sum(self.llr_sn, axis=0)
            if d:
                llr = d * self.llr_vn + (1 - d) * llr
            self.llr_vn = np.clip(llr, -LLR_CLAMP, LLR_CLAMP)

    def iterate(self, n_iter: int):
        for _ in range(n_iter):
            self.sn_update()
            self.vn_update()
            self.iterations += 1
        return self

    def finalize(self) -> DadCeResult:
        mu, cov = self._combine(self.prec_sn.sum(0), self.eta_sn.sum(0),
                                self.out_mu_pri, self.out_cov_pri)
        l_sn_total = self.llr_sn.sum(0)
        if self.fixed:
            ce = np.zeros(self.K)
            l_dec = np.full(self.K, np.inf)
        else:
            ce = l_ce(mu, cov, self.out_mu_pri, self.out_cov_pri)
            l_dec = self.l0 + l_sn_total + ce
        return DadCeResult(mu, cov, l_dec, l_sn_total, ce, self.l0, self.iterations)


def run_dad_ce_matrix(A, y, noise, pa, n_iter=20, diag=True, **kwargs) -> DadCeResult:
    return DadCeGraph(A, y, noise, pa=pa, diag=diag, **kwargs).iterate(n_iter).finalize()


def run_dad_ce(cfg, codebook, y_p, pa=None, n_iter=None) -> DadCeResult:
    """Detect active preamble columns and estimate their channels from ``y_p``."""
    y_p = np.asarray(y_p)
    if y_p.shape != (cfg.Lp, cfg.M):
        raise ValueError(f"y_p must be {cfg.Lp} x {cfg.M}, got {y_p.shape}")
    A = np.sqrt(cfg.power) * codebook.a
    return run_dad_ce_matrix(
        A, y_p, cfg.sigma2,
        pa=cfg.activity_prior if pa is None else pa,
        n_iter=cfg.n_iter_dadce if n_iter is None else n_iter,
        diag=cfg.diag_approx, damping=cfg.damping)
