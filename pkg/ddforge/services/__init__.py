"""Numerical services: noise models, sequences, transforms, coherence, optimisers and analyses."""
