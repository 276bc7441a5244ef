"""Linear stability analysis of axisymmetric relativistic Vlasov-Maxwell
equilibria in bounded domains with specularly reflecting walls."""

__version__ = "0.1.0"
