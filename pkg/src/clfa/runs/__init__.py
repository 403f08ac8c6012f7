from . import run_utils

from . import run_schema as RS
from .run_interface import RUNS
