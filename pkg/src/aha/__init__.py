"""Complementary-memory one-shot learning and its extended Omniglot benchmark.

A slowly pretrained convolutional sparse-autoencoder vision component (LTM)
feeds two interchangeable one-shot short-term memories: a hippocampus-style
subfield pipeline (AHA: pattern separation, Hopfield completion, retrieval
and image mapping networks) and a plain two-layer baseline (FastNN).  The
harness runs study/recall episodes over one-shot classification and one-shot
instance tasks under occlusion and noise, scoring min-MSE matching accuracy
and recall loss.
"""

__version__ = "0.1.0"
