#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
circumnav - Range-only UAV circumnavigation
===========================================

Simulation of a fixed-speed UAV orbiting a target using range (and
optionally range rate) measurements, with the tooling to check the
stability claims of the guidance law on simulated runs.
"""

__version__ = "1.0.0"
__author__ = "circumnav"
