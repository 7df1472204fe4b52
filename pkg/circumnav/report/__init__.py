#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""CSV / JSON artifact writers."""
