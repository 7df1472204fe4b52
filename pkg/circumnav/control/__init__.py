#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""Guidance law and range-rate estimator."""
