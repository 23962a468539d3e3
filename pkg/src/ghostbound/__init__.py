"""Numerical checks for a normal oscillator coupled to a ghost oscillator.

Submodules: :mod:`model` (potential, observables, ceilings),
:mod:`commutator` (vanishing of ``[C, H]``), :mod:`ehrenfest` (classical
orbits), :mod:`grid` (wavepacket propagation) and :mod:`fock` (truncated
Hermite-basis spectrum).
"""
__version__ = "0.1.0"
