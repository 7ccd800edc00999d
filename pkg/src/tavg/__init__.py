"""tavg: audio-conditioned face-video synthesis with a ConvGRU conditional GAN."""

__version__ = "0.1.0"
