"""Radial numerics for the equivariant precession flow v_t = v x Delta v into the sphere.

The toolkit targets the degree-1 equivariant reduction near bubble
concentration: constructing near-bubble states, evolving them with a
norm-preserving integrator, extracting scale and rotation, and comparing
their collapse against reduced parameter dynamics.

Modules:
    geometry    sphere-valued radial profiles, bubbles, frames, Dirichlet energy
    linops      linearized radial operator, resonance, source solves, radiation profile
    modulation  reduced parameter dynamics (b, a, lambda, theta), blow-up rate fits
    pde         norm-preserving implicit-midpoint evolution of the reduced flow
    extraction  scale/rotation/rate recovery from PDE states, remainder diagnostics
    initdata    near-bubble initial data carrying a prescribed shrink rate
    harness     run persistence, plot-data emission, verification suite
    cli         command-line front end
"""

__version__ = "0.1.0"
