"""Scripts package for jumpbem."""
