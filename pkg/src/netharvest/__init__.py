"""Selective harvesting on incomplete networks.

Probe boundary nodes of a partially observed graph to collect as many
target-labeled nodes as possible under a query budget.  The package bundles
the probing environment, synthetic and file-based instance generators,
seed-centric node rankings with fixed-size state compression, an actor-critic
agent trained with clipped policy-gradient updates, greedy/online baselines,
and an embedding-quality benchmark harness.
"""

__version__ = "0.1.0"
