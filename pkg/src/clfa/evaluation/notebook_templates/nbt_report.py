import nbformat as nbf

from .nbt_utils import CellMetadata


# DOC: notebook written next to summary.csv by `clfa report`; the "curves" mode adds the loss-curve cells

notebook_template = nbf.v4.new_notebook()
notebook_template.cells.extend([
    nbf.v4.new_markdown_cell("""
        # {title}

        Accuracy summary of {n_runs} run(s). Model selection: {selection}. Std over seeds: {std_mode}.
    """,
    metadata={ CellMetadata.NEED_FORMAT: True }),

    nbf.v4.new_code_cell("""
        # Section "Dependencies"

        import os
        import json

        import pandas as pd
    """,
    metadata={ CellMetadata.CHECK_IMPORT: True }),

    nbf.v4.new_code_cell("""
        # Section "Parameters"

        summary_csv = '{summary_csv}'

        run_dirs = {run_dirs}
    """,
    metadata={ CellMetadata.NEED_FORMAT: True }),

    nbf.v4.new_code_cell("""
        summary = pd.read_csv(summary_csv)
        summary
    """),

    nbf.v4.new_code_cell("""
        # Section "Loss curves"

        import pandas as pd
        import matplotlib.pyplot as plt
    """,
    metadata={ CellMetadata.CHECK_IMPORT: True, CellMetadata.MODE: "curves" }),

    nbf.v4.new_code_cell("""
        def read_metrics(run_dir):
            with open(os.path.join(run_dir, 'metrics.jsonl')) as f:
                rows = [json.loads(line) for line in f if line.strip()]
            return pd.DataFrame([r for r in rows if 'total' in r])

        fig, axes = plt.subplots(1, 5, figsize=(20, 3.5))
        for run_dir in run_dirs:
            curve = read_metrics(run_dir)
            for ax, term in zip(axes, ['cls', 'ind', 'aug', 'int', 'total']):
                ax.plot(curve['iter'], curve[term], label=os.path.basename(run_dir))
                ax.set_title(term)
        axes[-1].legend()
        plt.tight_layout()
    """,
    metadata={ CellMetadata.MODE: "curves" }),
])
