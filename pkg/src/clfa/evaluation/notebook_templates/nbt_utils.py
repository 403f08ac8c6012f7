import re
import copy

import nbformat as nbf

from clfa.common.utils import atomic_write



class CellMetadata():

    NEED_FORMAT = "NEED_FORMAT"             # DOC: the cell source is a str.format template filled from the values dict
    CHECK_IMPORT = "CHECK_IMPORT"           # DOC: import lines already present in earlier import cells are dropped
    MODE = "MODE"                           # DOC: the cell is kept only when the notebook is written in this mode (unset = always)


def dedent_cell(code: str, values: dict | None = None) -> str:
    """Fill the template (when values are given), strip blank edge lines and the common indentation."""
    if values is not None:
        code = code.format(**values)
    lines = code.split("\n")
    while lines and lines[0].strip() == "":
        lines = lines[1:]
    while lines and lines[-1].strip() == "":
        lines = lines[:-1]
    if len(lines) == 0:
        return ""
    indent = re.match(r"^\s*", lines[0])
    indent = len(indent.group()) if indent else 0
    return "\n".join(line[indent:] for line in lines)


def drop_repeated_imports(code: str, previous: list[str]) -> str:
    seen = { line.strip() for block in previous for line in block.split("\n") }
    return "\n".join(line for line in code.split("\n") if line.strip() not in seen or line.strip() == "")


def write_notebook_template(template: nbf.NotebookNode, values: dict = dict(), mode: str | None = None) -> nbf.NotebookNode:
    """
    Compile a notebook template into a new notebook.

    Args:
        template: Notebook whose cells carry CellMetadata flags. It is not modified.
        values: Values for NEED_FORMAT cells.
        mode: Keep MODE-tagged cells of this mode only.
    """
    notebook = copy.deepcopy(template)
    compiled, import_blocks = [], []
    for cell in notebook.cells:
        cell_mode = cell.metadata.pop(CellMetadata.MODE, None)
        if cell_mode is not None and cell_mode != mode:
            continue
        need_format = cell.metadata.pop(CellMetadata.NEED_FORMAT, False)
        cell.source = dedent_cell(cell.source, values if need_format else None)
        if cell.metadata.pop(CellMetadata.CHECK_IMPORT, False):
            source = drop_repeated_imports(cell.source, import_blocks)
            import_blocks.append(cell.source)
            cell.source = source
        if cell.cell_type == "code" and cell.source.strip() == "":
            continue
        compiled.append(cell)
    notebook.cells = compiled
    return notebook


def save_notebook(notebook: nbf.NotebookNode, path: str) -> str:
    nbf.validate(notebook)
    return atomic_write(path, lambda tmp: nbf.write(notebook, tmp))
