from .nbt_utils import CellMetadata, write_notebook_template, save_notebook

from .nbt_report import notebook_template as report_notebook
