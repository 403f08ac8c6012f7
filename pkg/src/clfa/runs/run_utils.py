import logging

from clfa.common.errors import ClfaError, data_error
from clfa.common.logger import fmsg
from clfa.runs import run_schema as RS

logger = logging.getLogger(__name__)


def cast_record(entry: dict, line: int | None = None) -> RS.Record | None:
    """
    Rebuild one logged record from its kind tag.

    Args:
        entry (dict): A line of records.jsonl.
        line (int): 1-based line number, reported on failure.

    Returns:
        The record, or None when the kind is unknown to this version.

    Raises:
        ClfaError: DATA error when a known kind does not validate.
    """
    kind = entry.get("kind")
    schema = RS.SCHEMAS.get(kind)
    if schema is None:
        logger.warning(fmsg("Skipping record of unknown kind", kind=kind, line=line))
        return None
    try:
        return schema.from_dict(entry)
    except ClfaError as e:
        raise data_error(f"Malformed {kind} record: {e.reason}", line=line) from e
    except (TypeError, ValueError, AttributeError) as e:
        raise data_error(f"Malformed {kind} record: {e}", line=line) from e


def cast_by_kind(records: list[dict]) -> list[RS.Record]:
    """Cast logged records in file order. Unknown kinds are skipped."""
    cast = (cast_record(entry, line=i + 1) for i, entry in enumerate(records))
    return [r for r in cast if r is not None]
