# -*- coding: utf-8 -*-

"""Attention referential game laboratory
"""

VERSION = "0.1.0"
BANNER = r"""
   __  __  __
  / /_/ /_/ /___    ___ ____ ___ _  ___
 / __/ __/ / _  \  / _ `/ _ `/  ' \/ -_)
 \__/\__/_/_//_/   \_, /\_,_/_/_/_/\__/
                  /___/
"""

import traceback

try:
    from . import agents
    from . import nn
    from . import world
except ImportError:
    traceback.print_exc()
