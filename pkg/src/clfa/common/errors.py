from typing import Optional


# DOC: ClfaError is the single exception type raised by the package. The type says which contract was broken.

class ClfaError(Exception):


    # DOC: ErrorType enumerates the error categories, each one maps to a CLI exit code
    class ErrorType():
        CONFIG = "CONFIG"
        ARGUMENT = "ARGUMENT"
        DATA = "DATA"
        IO = "IO"
        NUMERIC = "NUMERIC"

    EXIT_CODES = {
        ErrorType.CONFIG: 2,
        ErrorType.ARGUMENT: 3,
        ErrorType.DATA: 4,
        ErrorType.IO: 5,
        ErrorType.NUMERIC: 6,
    }

    def __init__(self, error_type: str, reason: str, data: Optional[dict] = None):
        super().__init__(reason)
        self.type = error_type
        self.reason = reason
        self.data = data if data is not None else dict()

    @property
    def message(self):
        return self.reason

    @property
    def exit_code(self) -> int:
        return self.EXIT_CODES.get(self.type, 1)

    @property
    def one_line(self) -> str:
        """Machine-parsable single line used on stderr."""
        return f"{self.type}: {' '.join(self.reason.split())}"

    @property
    def as_dict(self):
        return {
            "type": self.type,
            "reason": self.reason,
            "data": self.data,
        }


ErrorType = ClfaError.ErrorType


def config_error(reason: str, **data) -> ClfaError:
    return ClfaError(ErrorType.CONFIG, reason, data)

def argument_error(reason: str, **data) -> ClfaError:
    return ClfaError(ErrorType.ARGUMENT, reason, data)

def data_error(reason: str, **data) -> ClfaError:
    return ClfaError(ErrorType.DATA, reason, data)

def io_error(reason: str, **data) -> ClfaError:
    return ClfaError(ErrorType.IO, reason, data)

def numeric_error(reason: str, **data) -> ClfaError:
    return ClfaError(ErrorType.NUMERIC, reason, data)
