"""Ridge regression, homotopic initialization for dual coordinate descent,
spectral regularity of the response, and biased gradient steps for GLMs."""

__version__ = "0.1.0"
