"""Tests package for jumpbem."""
