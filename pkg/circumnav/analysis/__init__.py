#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""Lyapunov, linearization and run metrics."""
