""" Commands for the lc-pnp command line """
from . import experiment, tests
