from . import names
from . import errors
from . import logger
from . import utils
