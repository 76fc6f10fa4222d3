"""Exact Bayes-optimal denoiser over an enumerable discrete support.

For a known prior over a finite set of codewords c_i with probabilities
p_i, the corruption process makes x_t | x_0=c Gaussian, so the posterior
mean E[x_0 | x_t] is a closed-form softmax-weighted average:

    w_i  propto  p_i * exp(-||x_t - sqrt(g) c_i||^2 / (2 (1 - g))),
    E[x_0 | x_t] = sum_i w_i c_i,       g = gamma(t).

This is the ground-truth denoiser used to verify the sampler without any
training in the loop.
"""

import numpy as np

from .errors import ConfigError
from .schedule import Schedule, gamma

MAX_SUPPORT = 2 ** 16

# Below this signal-noise gap the Gaussian likelihood is degenerate and
# the posterior collapses onto the nearest codeword.
_DEGENERATE_GAP = 1e-30


class OracleDenoiser:
    """Posterior-mean denoiser for a finite codeword support.

    ``codewords`` is [support, features], ``probs`` the matching prior.
    ``predict`` ignores the conditioning input so the oracle can stand in
    anywhere a trained denoiser is expected.
    """

    def __init__(self, codewords, probs, sched: Schedule = Schedule()):
        cw = np.asarray(codewords, dtype=np.float64)
        p = np.asarray(probs, dtype=np.float64)
        if cw.ndim != 2 or cw.shape[0] == 0:
            raise ConfigError("support must be a non-empty [support, features] array")
        if cw.shape[0] > MAX_SUPPORT:
            raise ConfigError(f"support size {cw.shape[0]} exceeds cap {MAX_SUPPORT}")
        if p.shape != (cw.shape[0],):
            raise ConfigError("probs must be one probability per codeword")
        if (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigError("probs must be non-negative and sum to 1")
        if len({tuple(row) for row in cw}) != cw.shape[0]:
            raise ConfigError("codewords must be distinct")
        self.codewords = cw
        self.probs = p
        self.sched = sched
        self._log_probs = np.log(np.maximum(p, 1e-300))
        self._cw_sq = (cw ** 2).sum(axis=1)

    @property
    def n_features(self) -> int:
        return self.codewords.shape[1]

    def _log_weights(self, x, gap):
        # ||x - sqrt(g) c||^2 expanded, with g = 1 - gap; keeping the noise
        # variance ``gap`` exact matters when it is tiny.
        g = 1.0 - gap
        d2 = (
            (x ** 2).sum(axis=1, keepdims=True)
            - 2.0 * np.sqrt(g) * (x @ self.codewords.T)
            + g * self._cw_sq[None, :]
        )
        return self._log_probs[None, :] - d2 / (2.0 * gap)

    def posterior_weights(self, x_t, t) -> np.ndarray:
        """Posterior probability of each codeword given x_t, shape [batch, support]."""
        x = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
        g = np.asarray(gamma(t, self.sched), dtype=np.float64)
        if g.ndim == 1:
            g = g[:, None]
        gap = np.broadcast_to(np.asarray(1.0 - g), (x.shape[0], 1))
        degenerate = gap[:, 0] < _DEGENERATE_GAP
        if not degenerate.any():
            return self._softmax_weights(x, gap)
        # Noise-free rows: all mass on the nearest codeword.
        w = np.zeros((x.shape[0], self.codewords.shape[0]))
        if (~degenerate).any():
            w[~degenerate] = self._softmax_weights(x[~degenerate], gap[~degenerate])
        xd = x[degenerate]
        d2 = ((xd[:, None, :] - self.codewords[None, :, :]) ** 2).sum(axis=-1)
        w[np.nonzero(degenerate)[0], d2.argmin(axis=1)] = 1.0
        return w

    def _softmax_weights(self, x, gap):
        logw = self._log_weights(x, gap)
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        return w / w.sum(axis=1, keepdims=True)

    def posterior_mean(self, x_t, t) -> np.ndarray:
        """E[x_0 | x_t] at time t; accepts scalar t or one t per row."""
        x = np.asarray(x_t, dtype=np.float64)
        out = self.posterior_weights(x, t) @ self.codewords
        return out.reshape(x.shape) if x.ndim == 1 else out

    def predict(self, x_t, x_cond, t) -> np.ndarray:
        """Denoiser interface; the conditioning input is ignored."""
        return self.posterior_mean(x_t, t)
