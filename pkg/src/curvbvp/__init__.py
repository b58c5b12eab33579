"""Half-line boundary value problems for difference equations with the mean curvature operator.

Subpackages and modules:

- :mod:`curvbvp.seq_core`: lazily evaluated half-line sequences and tail sums.
- :mod:`curvbvp.linrec`: linear three-term equations and their recessive solutions.
- :mod:`curvbvp.sturm`: majorant comparisons and positivity certificates.
- :mod:`curvbvp.decay`: product bounds and their decay.
- :mod:`curvbvp.bvp`: the nonlinear problem, solvability criteria and the fixed-point solver.
- :mod:`curvbvp.cli`: the ``curvbvp`` command.
"""

__version__ = "0.1.0"
