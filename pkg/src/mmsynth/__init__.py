"""Attribute-conditioned multimodal image synthesis.

One conditional generator maps (noise, attribute vector) to a set of aligned
images, one per modality, and is trained progressively from 4x4 upward
against a multimodal critic with an auxiliary label estimator.
"""

__version__ = "0.1.0"
