"""Universal computation by multi-particle quantum walk: gadgets, scattering,
two-particle phases, many-body dynamics and a circuit-to-graph compiler."""

__version__ = "0.1.0"
