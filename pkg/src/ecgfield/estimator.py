"""Scikit-learn style facade over training and view synthesis.

``PanoramaSynthesizer`` wraps the training loop and the encoder/decoder in
the familiar ``fit`` / ``predict`` / ``score`` shape, with flat constructor
hyperparameters so it composes with ``clone``, pipelines, and parameter
searches.  Samples are ``MultiViewCycle`` objects.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .metrics import psnr, ssim_1d
from .nefnet import ModelConfig, decode_view, encode_and_fuse
from .training import TrainConfig, ViewGroupSplit, train
from .validation import check_cycles, check_viewpoints


class PanoramaSynthesizer(BaseEstimator):
    """Learn an electrocardio-field model and synthesize arbitrary views.

    Parameters
    ----------
    input_views : sequence of lead names or (theta, phi) pairs
        Views encoded into the field representation (IG).
    target_views : sequence
        Views reconstructed under supervision during training (RG);
        disjoint from ``input_views``.
    epochs, batch_size, lr, momentum, seed, standin : training knobs
        Mirroring the training configuration defaults.
    use_basic_branch : bool
        Disable to train a deflection-only model for from-scratch synthesis.
    """

    def __init__(
        self,
        input_views=("I", "V1", "aVF"),
        target_views=("III", "aVR", "aVL", "V2", "V5"),
        epochs=30,
        batch_size=32,
        lr=0.1,
        momentum=0.9,
        seed=0,
        standin=True,
        use_basic_branch=True,
    ):
        self.input_views = input_views
        self.target_views = target_views
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.seed = seed
        self.standin = standin
        self.use_basic_branch = use_basic_branch

    def _split(self) -> ViewGroupSplit:
        return ViewGroupSplit(
            input_group=list(self.input_views),
            reconstruction_group=list(self.target_views),
        )

    def fit(self, X, y=None):
        """Train on a list of MultiViewCycle samples; returns self."""
        cycles = check_cycles(X)
        tcfg = TrainConfig(
            batch_size=self.batch_size, epochs=self.epochs, lr=self.lr,
            momentum=self.momentum, seed=self.seed, standin_enabled=self.standin)
        mcfg = ModelConfig(
            t_x=cycles[0].length, seed=self.seed, use_basic_branch=self.use_basic_branch)
        self.net_, self.history_ = train(cycles, self._split(), tcfg, mcfg)
        return self

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise NotFittedError("this PanoramaSynthesizer is not fitted yet; call fit first")

    def transform(self, X):
        """Encode cycles into fused field representations (one per sample)."""
        self._check_fitted()
        cycles = check_cycles(X)
        ig = check_viewpoints(self.input_views)
        return [
            encode_and_fuse(self.net_, mvc.subset(ig), None).detach()
            for mvc in cycles
        ]

    def predict(self, X, viewpoints=None):
        """Synthesize traces; returns an (n_samples, n_views, t_x) array.

        ``viewpoints`` defaults to the estimator's target views.
        """
        self._check_fitted()
        cycles = check_cycles(X)
        queries = check_viewpoints(viewpoints if viewpoints is not None else self.target_views)
        fields = self.transform(cycles)
        out = np.empty((len(cycles), len(queries), self.net_.cfg.t_x))
        for i, field in enumerate(fields):
            for j, q in enumerate(queries):
                out[i, j] = decode_view(self.net_, field, q, None)
        return out

    def score(self, X, y=None, viewpoints=None):
        """Mean PSNR (dB) of synthesized views against the recorded ones."""
        self._check_fitted()
        cycles = check_cycles(X)
        queries = check_viewpoints(viewpoints if viewpoints is not None else self.target_views)
        preds = self.predict(cycles, queries)
        scores = [
            psnr(mvc.signal_at(q), preds[i, j])
            for i, mvc in enumerate(cycles)
            for j, q in enumerate(queries)
        ]
        return float(np.mean(scores))

    def score_ssim(self, X, viewpoints=None):
        """Mean 1-D SSIM of synthesized views against the recorded ones."""
        self._check_fitted()
        cycles = check_cycles(X)
        queries = check_viewpoints(viewpoints if viewpoints is not None else self.target_views)
        preds = self.predict(cycles, queries)
        scores = [
            ssim_1d(mvc.signal_at(q), preds[i, j])
            for i, mvc in enumerate(cycles)
            for j, q in enumerate(queries)
        ]
        return float(np.mean(scores))
