"""Desk-scale laboratory for long-tailed classification.

Implements inverse-view loss reweighting (closed-form per-class weights
plus macro-level batch-frequency compensation), neural-collapse geometry
metrics, the usual reweighting baselines, a Mittag-Leffler learning-rate
schedule, synthetic long-tailed data generation, and a deterministic
trainer tying them together.
"""

__version__ = "0.1.0"
