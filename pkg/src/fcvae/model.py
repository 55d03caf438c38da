"""Frequency-conditioned VAE for sliding windows of a univariate series.

The condition for the CVAE is frequency information extracted from the
window itself: a global module (GFM) embeds the whole window's amplitude
spectrum, a local module (LFM) embeds small-window spectra and fuses
them by target attention with the latest small window as the query.
When ``mask_last`` is on (the default), conditions are computed from the
window with its final point zeroed, so the condition can never leak the
value the detector is asked to judge.

Training objective is a masked conditional ELBO: per-point alpha weights
drop the reconstruction terms of untrusted points and scale the prior
term by beta = mean(alpha). With all alpha = 1 it is exactly the plain
conditional ELBO.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import nn, spectral
from .errors import ConfigError, DataError
from .nn import Tensor

LFM_MODES = ("attention", "latest", "average_pooling")

STD_FLOOR = 1e-4


@dataclass
class FCVAEConfig:
    """Network geometry and training-objective switches."""

    window: int = 120
    small_window: int = 30
    small_window_stride: int = 10
    cond_dim: int = 32
    latent_dim: int = 8
    hidden: list = field(default_factory=lambda: [100, 100])
    dropout: float = 0.1
    lfm_mode: str = "attention"
    use_gfm: bool = True
    use_lfm: bool = True
    mc_samples: int = 1
    mask_last: bool = True
    plain_elbo: bool = False

    @property
    def n_small(self) -> int:
        return (self.window - self.small_window) // self.small_window_stride + 1

    def validate(self) -> None:
        if self.window < 2:
            raise ConfigError(f"window must be >= 2, got {self.window}")
        if not 2 <= self.small_window <= self.window:
            raise ConfigError(
                f"small_window must be in [2, window={self.window}], got {self.small_window}")
        if self.small_window_stride < 1:
            raise ConfigError(f"small_window_stride must be >= 1, got {self.small_window_stride}")
        if (self.window - self.small_window) % self.small_window_stride != 0:
            raise ConfigError(
                f"small_window_stride={self.small_window_stride} does not tile the window: "
                f"({self.window} - {self.small_window}) not divisible")
        if self.cond_dim < 1:
            raise ConfigError(f"cond_dim must be >= 1, got {self.cond_dim}")
        if self.latent_dim < 1:
            raise ConfigError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if not self.hidden:
            raise ConfigError("hidden must list at least one layer width")
        for h in self.hidden:
            if int(h) != h or h < 1:
                raise ConfigError(f"hidden widths must be positive integers, got {self.hidden}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.lfm_mode not in LFM_MODES:
            raise ConfigError(f"lfm_mode must be one of {LFM_MODES}, got {self.lfm_mode!r}")
        if self.mc_samples < 1:
            raise ConfigError(f"mc_samples must be >= 1, got {self.mc_samples}")
        if self.use_lfm and self.lfm_mode == "attention" and self.n_small < 2:
            raise ConfigError(
                f"attention needs at least 2 small windows (got n={self.n_small}); "
                "use a smaller small_window or lfm_mode=latest")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FCVAEConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class ConditionVector:
    """Per-window condition halves, each of length cond_dim."""

    f_local: np.ndarray
    f_global: np.ndarray


@dataclass
class GaussianParams:
    """Diagonal Gaussian with a positive std floor."""

    mean: np.ndarray
    std: np.ndarray


class FCVAE:
    """The network: parameters plus forward passes and the loss."""

    def __init__(self, config: FCVAEConfig, seed: int = 0):
        config.validate()
        self.config = config
        self.params = nn.ParameterStore()
        self.stats: dict[str, tuple[float, float]] = {}
        self._build(seed)

    # construction -----------------------------------------------------

    def _build(self, seed: int) -> None:
        cfg = self.config
        rng = np.random.default_rng(seed)

        def dense(name: str, fan_in: int, fan_out: int) -> None:
            self.params.add(f"{name}.weight", nn.glorot_uniform(fan_in, fan_out, rng))
            self.params.add(f"{name}.bias", np.zeros(fan_out))

        if cfg.use_gfm:
            dense("gfm.dense", cfg.window // 2 + 1, cfg.cond_dim)
        if cfg.use_lfm:
            dense("lfm.embed", cfg.small_window // 2 + 1, cfg.cond_dim)
            dense("lfm.ff", cfg.cond_dim, cfg.cond_dim)
        width = cfg.window + 2 * cfg.cond_dim
        for i, h in enumerate(cfg.hidden):
            dense(f"encoder.hidden{i}", width, h)
            width = h
        dense("encoder.mean", width, cfg.latent_dim)
        dense("encoder.std", width, cfg.latent_dim)
        width = cfg.latent_dim + 2 * cfg.cond_dim
        for i, h in enumerate(reversed(cfg.hidden)):
            dense(f"decoder.hidden{i}", width, h)
            width = h
        dense("decoder.mean", width, cfg.window)
        dense("decoder.std", width, cfg.window)

    def _dense(self, name: str, x: Tensor) -> Tensor:
        return nn.dense_forward(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"])

    # condition extractors ----------------------------------------------

    def _gfm_batch(self, masked: np.ndarray, training: bool,
                   rng: np.random.Generator | None) -> Tensor:
        amps = spectral.amplitude_matrix(masked)
        h = self._dense("gfm.dense", Tensor(amps))
        return nn.dropout(h, self.config.dropout, training, rng)

    def _lfm_batch(self, masked: np.ndarray, training: bool,
                   rng: np.random.Generator | None) -> Tensor:
        cfg = self.config
        b = masked.shape[0]
        k, s, n, d = cfg.small_window, cfg.small_window_stride, cfg.n_small, cfg.cond_dim
        sw = np.stack([masked[:, j * s : j * s + k] for j in range(n)], axis=1)  # (b, n, k)
        amps = np.abs(np.fft.rfft(sw, axis=2)) / k
        embeds = self._dense("lfm.embed", Tensor(amps.reshape(b * n, k // 2 + 1)))  # (b*n, d)

        if cfg.lfm_mode == "attention":
            q_idx = np.arange(b) * n + (n - 1)
            keys_idx = (np.arange(b)[:, None] * n + np.arange(n - 1)[None, :]).ravel()
            q = nn.gather_rows(embeds, q_idx)                               # (b, d)
            kv = nn.reshape(nn.gather_rows(embeds, keys_idx), (b, n - 1, d))
            scores = nn.tsum(nn.mul(nn.reshape(q, (b, 1, d)), kv), axis=2)  # (b, n-1)
            weights = nn.softmax(nn.mul(scores, 1.0 / math.sqrt(d)))
            feats = nn.tsum(nn.mul(nn.reshape(weights, (b, n - 1, 1)), kv), axis=1)
        elif cfg.lfm_mode == "latest":
            q_idx = np.arange(b) * n + (n - 1)
            feats = nn.gather_rows(embeds, q_idx)
        else:  # average_pooling over all small windows
            feats = nn.tmean(nn.reshape(embeds, (b, n, d)), axis=1)

        h = nn.tanh(self._dense("lfm.ff", feats))
        return nn.dropout(h, cfg.dropout, training, rng)

    def _masked(self, windows: np.ndarray) -> np.ndarray:
        if not self.config.mask_last:
            return windows
        out = windows.copy()
        out[:, -1] = 0.0
        return out

    def conditions(self, windows: np.ndarray, training: bool = False,
                   rng: np.random.Generator | None = None) -> tuple[Tensor, Tensor]:
        """Condition halves for a (batch, W) array; applies last-point masking.

        Draw order when training with dropout: the LFM mask first, then
        the GFM mask. Disabled modules contribute constant zeros.
        """
        cfg = self.config
        b = windows.shape[0]
        masked = self._masked(windows)
        if cfg.use_lfm:
            f_local = self._lfm_batch(masked, training, rng)
        else:
            f_local = Tensor(np.zeros((b, cfg.cond_dim)))
        if cfg.use_gfm:
            f_global = self._gfm_batch(masked, training, rng)
        else:
            f_global = Tensor(np.zeros((b, cfg.cond_dim)))
        return f_local, f_global

    def gfm(self, x: np.ndarray, training: bool = False,
            rng: np.random.Generator | None = None) -> np.ndarray:
        """Global condition of a single already-masked window."""
        if not self.config.use_gfm:
            return np.zeros(self.config.cond_dim)
        x = np.asarray(x, dtype=np.float64)
        with nn.no_grad():
            return self._gfm_batch(x[None, :], training, rng).data[0]

    def lfm(self, x: np.ndarray, training: bool = False,
            rng: np.random.Generator | None = None) -> np.ndarray:
        """Local condition of a single already-masked window."""
        if not self.config.use_lfm:
            return np.zeros(self.config.cond_dim)
        x = np.asarray(x, dtype=np.float64)
        with nn.no_grad():
            return self._lfm_batch(x[None, :], training, rng).data[0]

    def condition_vector(self, x: np.ndarray) -> ConditionVector:
        """Deterministic (eval-mode) condition of a single raw window."""
        x = np.asarray(x, dtype=np.float64)
        with nn.no_grad():
            f_local, f_global = self.conditions(x[None, :], training=False, rng=None)
        return ConditionVector(f_local=f_local.data[0], f_global=f_global.data[0])

    def attention_weights(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode attention weights over the n-1 key small windows."""
        cfg = self.config
        if not (cfg.use_lfm and cfg.lfm_mode == "attention"):
            raise ConfigError("attention weights only exist in attention mode with LFM enabled")
        x = np.asarray(x, dtype=np.float64)
        masked = self._masked(x[None, :])
        k, s, n, d = cfg.small_window, cfg.small_window_stride, cfg.n_small, cfg.cond_dim
        with nn.no_grad():
            sw = np.stack([masked[:, j * s : j * s + k] for j in range(n)], axis=1)
            amps = np.abs(np.fft.rfft(sw, axis=2)) / k
            embeds = self._dense("lfm.embed", Tensor(amps.reshape(n, k // 2 + 1)))
            q = embeds.data[n - 1]
            keys = embeds.data[: n - 1]
            scores = keys @ q / math.sqrt(d)
            shift = np.exp(scores - scores.max())
        return shift / shift.sum()

    # encoder / decoder -------------------------------------------------

    def _heads(self, prefix: str, h: Tensor) -> tuple[Tensor, Tensor]:
        mean = self._dense(f"{prefix}.mean", h)
        std = nn.add(nn.softplus(self._dense(f"{prefix}.std", h)), STD_FLOOR)
        return mean, std

    def encode_batch(self, x: Tensor, f_local: Tensor, f_global: Tensor) -> tuple[Tensor, Tensor]:
        h = nn.concat([x, f_local, f_global], axis=1)
        for i in range(len(self.config.hidden)):
            h = nn.tanh(self._dense(f"encoder.hidden{i}", h))
        return self._heads("encoder", h)

    def decode_batch(self, z: Tensor, f_local: Tensor, f_global: Tensor) -> tuple[Tensor, Tensor]:
        h = nn.concat([z, f_local, f_global], axis=1)
        for i in range(len(self.config.hidden)):
            h = nn.tanh(self._dense(f"decoder.hidden{i}", h))
        return self._heads("decoder", h)

    def encode(self, x: np.ndarray, cond: ConditionVector) -> GaussianParams:
        """Posterior q(z | x, c) for a single window; deterministic."""
        x = np.asarray(x, dtype=np.float64)
        with nn.no_grad():
            mean, std = self.encode_batch(Tensor(x[None, :]), Tensor(cond.f_local[None, :]),
                                          Tensor(cond.f_global[None, :]))
        return GaussianParams(mean=mean.data[0], std=std.data[0])

    def decode(self, z: np.ndarray, cond: ConditionVector) -> GaussianParams:
        """Reconstruction p(x | z, c) for a single latent; deterministic."""
        z = np.asarray(z, dtype=np.float64)
        with nn.no_grad():
            mean, std = self.decode_batch(Tensor(z[None, :]), Tensor(cond.f_local[None, :]),
                                          Tensor(cond.f_global[None, :]))
        return GaussianParams(mean=mean.data[0], std=std.data[0])

    # loss ----------------------------------------------------------------

    def loss_batch(self, windows: np.ndarray, alpha: np.ndarray,
                   rng: np.random.Generator, training: bool = True) -> Tensor:
        """Mean negated masked conditional ELBO over a window batch.

        Per window: sum_w alpha_w * log N(x_w; mu_x_w, sigma_x_w)
        + beta * log N(z; 0, I) - log N(z; mu, sigma), averaged over
        mc_samples reparameterized draws, with beta = mean(alpha).
        plain_elbo forces alpha = 1 and beta = 1 (ablation).
        """
        windows = np.asarray(windows, dtype=np.float64)
        alpha = np.asarray(alpha, dtype=np.float64)
        if windows.shape != alpha.shape or windows.ndim != 2:
            raise ConfigError(f"windows {windows.shape} and alpha {alpha.shape} must be equal 2-D shapes")
        cfg = self.config
        b = windows.shape[0]
        if cfg.plain_elbo:
            a_eff = np.ones_like(alpha)
            beta = np.ones((b, 1))
        else:
            a_eff = alpha
            beta = alpha.mean(axis=1, keepdims=True)

        f_local, f_global = self.conditions(windows, training, rng)
        x = Tensor(windows)
        mu, std = self.encode_batch(x, f_local, f_global)

        acc = None
        for _ in range(cfg.mc_samples):
            z = nn.gaussian_sample(mu, std, rng)
            mu_x, std_x = self.decode_batch(z, f_local, f_global)
            recon = nn.tsum(nn.mul(nn.gaussian_log_prob(x, mu_x, std_x), Tensor(a_eff)),
                            axis=1, keepdims=True)
            log_pz = nn.tsum(nn.gaussian_log_prob(z, 0.0, 1.0), axis=1, keepdims=True)
            log_qz = nn.tsum(nn.gaussian_log_prob(z, mu, std), axis=1, keepdims=True)
            bound = nn.sub(nn.add(recon, nn.mul(Tensor(beta), log_pz)), log_qz)
            acc = bound if acc is None else nn.add(acc, bound)
        return nn.neg(nn.tmean(nn.mul(acc, 1.0 / cfg.mc_samples)))

    def cm_elbo(self, x: np.ndarray, alpha: np.ndarray,
                rng: np.random.Generator, training: bool = True) -> Tensor:
        """Single-window loss; see loss_batch."""
        x = np.asarray(x, dtype=np.float64)
        alpha = np.asarray(alpha, dtype=np.float64)
        return self.loss_batch(x[None, :], alpha[None, :], rng, training)

    # serialization ---------------------------------------------------------

    def to_document(self) -> dict:
        params = {}
        for name, p in self.params.items():
            params[name] = {"shape": list(p.data.shape), "data": p.data.ravel().tolist()}
        return {
            "format_version": 1,
            "config": self.config.to_dict(),
            "parameters": params,
            "stats": {cid: {"mean": m, "std": s} for cid, (m, s) in sorted(self.stats.items())},
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_document(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def from_document(cls, doc: dict) -> "FCVAE":
        if not isinstance(doc, dict) or doc.get("format_version") != 1:
            raise DataError(f"unsupported model format_version: {doc.get('format_version')!r}")
        model = cls(FCVAEConfig.from_dict(doc["config"]), seed=0)
        stored = doc["parameters"]
        expected = set(model.params.names())
        if set(stored) != expected:
            raise DataError(
                f"model parameters do not match config: missing {sorted(expected - set(stored))}, "
                f"unexpected {sorted(set(stored) - expected)}")
        for name, p in model.params.items():
            entry = stored[name]
            try:
                arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
            except (ValueError, TypeError, KeyError) as exc:
                raise DataError(f"parameter {name!r}: malformed entry ({exc})") from None
            if arr.shape != p.data.shape:
                raise DataError(f"parameter {name!r}: stored shape {arr.shape}, expected {p.data.shape}")
            p.data = arr
        model.stats = {cid: (float(v["mean"]), float(v["std"]))
                       for cid, v in doc.get("stats", {}).items()}
        return model

    @classmethod
    def load(cls, path: str | Path) -> "FCVAE":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"model file not found: {path}")
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}: not valid JSON ({e})") from None
        return cls.from_document(doc)
