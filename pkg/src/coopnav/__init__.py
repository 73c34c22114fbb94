"""Cooperative surface-anchor / underwater-vehicle localization simulator.

A fleet of GNSS-equipped surface vessels (ASVs) parked on a regular polygon
provides acoustic position fixes to underwater vehicles (AUVs) running
lawnmower surveys on dead reckoning.  The package simulates the formation
geometry, the conflict-graph TDMA uplink, the acoustic fix/loss model, the
downlink delivery timing, and the fixed-gain fusion filter, plus a sweep
harness for reproducing coverage/scale trade-off studies.
"""

__version__ = "0.1.0"
