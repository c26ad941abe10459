"""Cough-based COVID-19 screening pipeline built on numpy.

Submodules:

audio_io      WAV I/O, resampling, manifests and subject-disjoint splits
preprocess    short-time-energy cough segmentation
features      radix-2 FFT, mel filterbank, log-mel and frame-energy frontends
augment       crop/tile, circular shift and feature masking
model         reverse-mode tensors, the TDNN encoder, classifier and fusion gate
train_eval    BCE, Adam, warm-restart schedule, ROC-AUC, training and ablations
synth         synthetic burst corpus with exact ground truth
cli           the ``c2c`` command-line entry point
"""
__version__ = "0.1.0"
