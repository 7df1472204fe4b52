#!/usr/bin/env python
# -*- coding: utf-8 -*-

from circumnav.cli import main

if __name__ == "__main__":
    main()
