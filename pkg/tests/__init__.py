# Copyright (c) 2026 The pycanoa developers
# Distributed under the terms of the MIT license, see setup.py.
