"""Secret-key establishment over a pair of noisy broadcast channels.

Library layout:

- :mod:`skec.probability`  exact finite distributions and information measures
- :mod:`skec.channels`     broadcast-channel models, classification, sampling
- :mod:`skec.typicality`   typical-sequence machinery and codebook sampling
- :mod:`skec.bounds`       secret-key rate bounds and their maximizers
- :mod:`skec.icc`          the executable two-round key-establishment protocol
- :mod:`skec.cli`          batch front-end (``skec`` command)
"""

__version__ = "0.1.0"
