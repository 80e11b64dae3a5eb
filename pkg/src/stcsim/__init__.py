"""stcsim: linear-dispersion space-time codes, QR block-structure analysis,
breadth-first tree decoding with shared metric evaluation, and Monte Carlo
BER/complexity experiments."""

__version__ = "0.1.0"
