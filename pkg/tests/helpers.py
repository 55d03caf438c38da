"""Shared oracles and fixtures for the test suite.

Everything here is written independently of the library internals it
checks: the DFT oracle is the direct O(n^2) sum, the loss oracle is a
straight-line numpy transcription of the documented forward pass, and
the best-F1 oracle sweeps every candidate threshold with loop-based
adjustment. Slow is fine; these only run on small inputs.
"""

import math

import numpy as np

from fcvae import FCVAEConfig
from fcvae.model import STD_FLOOR

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# spectral oracle


def naive_dft(x):
    """Direct O(n^2) DFT sum, no FFT anywhere."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.size
    out = np.zeros(n, dtype=np.complex128)
    for f in range(n):
        for t in range(n):
            out[f] += x[t] * np.exp(-2j * np.pi * f * t / n)
    return out


# ---------------------------------------------------------------------------
# loss oracle: plain-numpy transcription of the documented forward pass


def _softplus(x):
    return np.where(x > 30.0, x, np.log1p(np.exp(np.minimum(x, 30.0))))


def _log_gauss(x, mean, std):
    d = x - mean
    quad = ((d * d) * std ** -2.0) * 0.5
    return (-0.5 * LOG_2PI - np.log(std)) - quad


def _ref_dropout(h, p, training, rng):
    if not training or p == 0.0:
        return h
    keep = (rng.random(h.shape) >= p).astype(np.float64) / (1.0 - p)
    return h * keep


def _ref_dense(P, name, x):
    return x @ P[name + ".weight"] + P[name + ".bias"]


def _ref_conditions(model, windows, training, rng):
    cfg = model.config
    P = {name: t.data for name, t in model.params.items()}
    b, W = windows.shape
    d = cfg.cond_dim
    masked = windows.copy()
    if cfg.mask_last:
        masked[:, -1] = 0.0

    if cfg.use_lfm:
        k, s, n = cfg.small_window, cfg.small_window_stride, cfg.n_small
        sw = np.stack([masked[:, j * s : j * s + k] for j in range(n)], axis=1)
        amps = np.abs(np.fft.rfft(sw, axis=2)) / k
        embeds = _ref_dense(P, "lfm.embed", amps.reshape(b * n, k // 2 + 1))
        embeds = embeds.reshape(b, n, d)
        if cfg.lfm_mode == "attention":
            q = embeds[:, -1, :]
            kv = embeds[:, :-1, :]
            scores = (q[:, None, :] * kv).sum(axis=2) * (1.0 / math.sqrt(d))
            e = np.exp(scores - scores.max(axis=-1, keepdims=True))
            weights = e / e.sum(axis=-1, keepdims=True)
            feats = (weights[:, :, None] * kv).sum(axis=1)
        elif cfg.lfm_mode == "latest":
            feats = embeds[:, -1, :]
        else:
            feats = embeds.mean(axis=1)
        h = np.tanh(_ref_dense(P, "lfm.ff", feats))
        f_local = _ref_dropout(h, cfg.dropout, training, rng)
    else:
        f_local = np.zeros((b, d))

    if cfg.use_gfm:
        amps = np.abs(np.fft.rfft(masked, axis=1)) / W
        h = _ref_dense(P, "gfm.dense", amps)
        f_global = _ref_dropout(h, cfg.dropout, training, rng)
    else:
        f_global = np.zeros((b, d))
    return f_local, f_global


def _ref_mlp(P, prefix, h, n_hidden):
    for i in range(n_hidden):
        h = np.tanh(_ref_dense(P, f"{prefix}.hidden{i}", h))
    mean = _ref_dense(P, f"{prefix}.mean", h)
    std = _softplus(_ref_dense(P, f"{prefix}.std", h)) + STD_FLOOR
    return mean, std


def reference_loss(model, windows, alpha, rng, training=True):
    """Numpy re-derivation of the batch loss, same draw order as the model:
    LFM dropout mask, then GFM dropout mask, then one eps per MC sample."""
    cfg = model.config
    P = {name: t.data for name, t in model.params.items()}
    windows = np.asarray(windows, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    b = windows.shape[0]
    nh = len(cfg.hidden)

    if cfg.plain_elbo:
        a_eff = np.ones_like(alpha)
        beta = np.ones((b, 1))
    else:
        a_eff = alpha
        beta = alpha.mean(axis=1, keepdims=True)

    f_local, f_global = _ref_conditions(model, windows, training, rng)
    mu, std = _ref_mlp(P, "encoder", np.concatenate([windows, f_local, f_global], axis=1), nh)

    acc = np.zeros((b, 1))
    for _ in range(cfg.mc_samples):
        eps = rng.standard_normal(mu.shape)
        z = mu + std * eps
        mu_x, std_x = _ref_mlp(P, "decoder", np.concatenate([z, f_local, f_global], axis=1), nh)
        recon = (_log_gauss(windows, mu_x, std_x) * a_eff).sum(axis=1, keepdims=True)
        log_pz = _log_gauss(z, 0.0, 1.0).sum(axis=1, keepdims=True)
        log_qz = _log_gauss(z, mu, std).sum(axis=1, keepdims=True)
        acc += (recon + beta * log_pz) - log_qz
    return float(-np.mean(acc * (1.0 / cfg.mc_samples)))


def plain_cvae_elbo(model, windows, rng, training=True):
    """The unmasked conditional ELBO: full reconstruction sum, unit prior
    weight. Written without any alpha or beta terms at all, so agreement
    with the masked loss at alpha = 1 is a real reduction check."""
    cfg = model.config
    P = {name: t.data for name, t in model.params.items()}
    windows = np.asarray(windows, dtype=np.float64)
    b = windows.shape[0]
    nh = len(cfg.hidden)

    f_local, f_global = _ref_conditions(model, windows, training, rng)
    mu, std = _ref_mlp(P, "encoder", np.concatenate([windows, f_local, f_global], axis=1), nh)

    acc = np.zeros((b, 1))
    for _ in range(cfg.mc_samples):
        eps = rng.standard_normal(mu.shape)
        z = mu + std * eps
        mu_x, std_x = _ref_mlp(P, "decoder", np.concatenate([z, f_local, f_global], axis=1), nh)
        recon = _log_gauss(windows, mu_x, std_x).sum(axis=1, keepdims=True)
        log_pz = _log_gauss(z, 0.0, 1.0).sum(axis=1, keepdims=True)
        log_qz = _log_gauss(z, mu, std).sum(axis=1, keepdims=True)
        acc += (recon + log_pz) - log_qz
    return float(-np.mean(acc * (1.0 / cfg.mc_samples)))


# ---------------------------------------------------------------------------
# evaluation oracle: exhaustive threshold sweep with loop-based adjustment


def oracle_point_adjust(pred, labels):
    pred = [int(v) for v in pred]
    labels = [int(v) for v in labels]
    out = list(pred)
    i = 0
    n = len(labels)
    while i < n:
        if labels[i] == 1:
            j = i
            while j + 1 < n and labels[j + 1] == 1:
                j += 1
            if any(pred[i : j + 1]):
                for p in range(i, j + 1):
                    out[p] = 1
            i = j + 1
        else:
            i += 1
    return out


def oracle_delay_adjust(pred, labels, delay):
    pred = [int(v) for v in pred]
    labels = [int(v) for v in labels]
    out = list(pred)
    i = 0
    n = len(labels)
    while i < n:
        if labels[i] == 1:
            j = i
            while j + 1 < n and labels[j + 1] == 1:
                j += 1
            hit = any(pred[i : min(j, i + delay) + 1])
            for p in range(i, j + 1):
                out[p] = 1 if hit else 0
            i = j + 1
        else:
            i += 1
    return out


def brute_force_best_f1(series, delay=None):
    """Try every distinct defined score as a threshold (pred = score >= t),
    adjust, count over defined positions only, keep the strictly best F1
    scanning thresholds downward. Returns (precision, recall, f1, threshold).
    """
    pooled = []
    total_anom = 0
    for ss in series:
        d = ss.defined
        pooled.extend(ss.scores[d].tolist())
        total_anom += int(np.sum(d & (ss.labels == 1)))
    if not pooled:
        raise ValueError("no defined scores")
    if total_anom == 0:
        return 0.0, 0.0, 0.0, max(pooled)

    best = None
    for tau in sorted(set(pooled), reverse=True):
        tp = 0
        fp = 0
        for ss in series:
            d = ss.defined
            pred = [1 if (d[i] and ss.scores[i] >= tau) else 0 for i in range(len(ss))]
            if delay is None:
                adj = oracle_point_adjust(pred, ss.labels)
            else:
                adj = oracle_delay_adjust(pred, ss.labels, delay)
            for i in range(len(ss)):
                if not d[i]:
                    continue
                if adj[i] and ss.labels[i] == 1:
                    tp += 1
                elif adj[i] and ss.labels[i] == 0:
                    fp += 1
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / total_anom
        f1 = 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)
        if best is None or f1 > best[2]:
            best = (p, r, f1, tau)
    return best


# ---------------------------------------------------------------------------
# small model/config factories


def tiny_config(**overrides):
    """A model small enough for finite differences and exhaustive checks."""
    base = dict(window=12, small_window=4, small_window_stride=4,
                cond_dim=3, latent_dim=2, hidden=[8], dropout=0.0,
                mc_samples=1)
    base.update(overrides)
    return FCVAEConfig(**base)


def finite_difference(f, params, eps=1e-5):
    """Central-difference gradients of scalar f() w.r.t. a ParameterStore."""
    grads = {}
    for name, p in params.items():
        g = np.zeros_like(p.data)
        flat = p.data.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            hi = f()
            flat[i] = keep - eps
            lo = f()
            flat[i] = keep
            gflat[i] = (hi - lo) / (2.0 * eps)
        grads[name] = g
    return grads
