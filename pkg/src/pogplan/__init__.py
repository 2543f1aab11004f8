"""Online planning for partially observable trajectory games.

Particle approximation of the joint state/observation-history distribution,
Nash equilibrium search by stochastic gradient play over observation-
conditioned policies, and receding-horizon execution, with four benchmark
scenarios and an experiment harness.
"""

__version__ = "0.1.0"
