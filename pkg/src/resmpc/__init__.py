"""Resilient MPC toolkit for linear systems under actuator denial-of-service attacks.

The package is organised as a small numpy library:

- ``polytope``: halfspace-polytope and interval-box algebra, robust invariant sets
- ``qp``: dense operator-splitting QP/LP solver
- ``model``: equivalent uncertain model and attack-intensity grid
- ``rmpc``: offline constraint preparation and the online adaptive-horizon controller
- ``detect``: Kalman-filter anomaly detection and attack-intensity estimation
- ``sim``: adaptive-cruise-control plant, attack scheduling, closed-loop harness
- ``scenario``: scenario configuration files
- ``cli``: ``prepare`` / ``run`` / ``compare`` / ``detect-demo`` subcommands
"""

__version__ = "0.1.0"
