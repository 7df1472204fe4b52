#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""Geometry and closed-loop dynamics."""
