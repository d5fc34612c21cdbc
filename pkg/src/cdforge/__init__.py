"""Synthetic corpus forging with contrastive decoding.

Trains good/bad model pairs, synthesizes corpora by contrastive and plain
ancestral sampling, trains models on real/synthetic mixtures, and compares
training methods with a paired-bootstrap protocol.
"""

__version__ = "0.1.0"
