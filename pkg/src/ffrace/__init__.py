"""Prime races in F_q[T]: characters, L-functions, bias and densities."""

__version__ = "0.1.0"
