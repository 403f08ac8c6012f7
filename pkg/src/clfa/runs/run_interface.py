# Deps
import os
import json
import glob
import logging
from typing import Optional, Sequence

from clfa.common import names as N
from clfa.common.config import TrainConfig, build_config
from clfa.common.errors import io_error
from clfa.common.logger import fmsg
from clfa.common.utils import append_jsonl, atomic_write, normpath, read_jsonl
from clfa.data.schema import Triple
from clfa.runs import run_schema as RS
from clfa.runs import run_utils

logger = logging.getLogger(__name__)


class RunInterface():
    """
    Reads and writes run directories: config snapshot, metrics and provenance logs, evaluation
    records and checkpoints.
    """

    def path(self, run_dir: str, filename: str) -> str:
        return normpath(os.path.join(run_dir, filename))


    # REGION: [Run setup]

    def create_run(self, run_dir: str, cfg: TrainConfig) -> str:
        """
        Create the run directory and write the configuration snapshot.

        Parameters:
            run_dir (str): The run directory, created when missing.
            cfg (TrainConfig): The effective configuration.
        """
        run_dir = normpath(run_dir)
        try:
            os.makedirs(run_dir, exist_ok=True)
        except OSError as e:
            raise io_error(f"Cannot create run directory {run_dir}: {e}", path=run_dir)

        def write(tmp):
            with open(tmp, "w", encoding="utf-8") as f:
                f.write(cfg.model_dump_json(indent=2))

        atomic_write(self.path(run_dir, RS.Files.CONFIG), write)
        return run_dir

    def load_config(self, run_dir: str) -> TrainConfig:
        path = self.path(run_dir, RS.Files.CONFIG)
        if not os.path.isfile(path):
            raise io_error(f"No configuration snapshot in {run_dir}", path=path)
        with open(path, "r", encoding="utf-8") as f:
            return build_config(json.load(f))

    # ENDREGION: [Run setup]


    # REGION: [Logs]

    def log_metrics(self, run_dir: str, entry: dict):
        append_jsonl(self.path(run_dir, RS.Files.METRICS), entry)

    def metrics(self, run_dir: str) -> list[dict]:
        return read_jsonl(self.path(run_dir, RS.Files.METRICS))

    def loss_curve(self, run_dir: str) -> list[dict]:
        return [m for m in self.metrics(run_dir) if N.LOSS_TOTAL in m]

    def truncate_metrics(self, run_dir: str, iteration: int):
        """Drop log lines written after iteration, before a resumed run appends again."""
        for filename in (RS.Files.METRICS, RS.Files.PROVENANCE):
            path = self.path(run_dir, filename)
            if not os.path.exists(path):
                continue
            kept = [entry for entry in read_jsonl(path) if entry.get("iter", 0) <= iteration]

            def write(tmp, kept=kept):
                with open(tmp, "w", encoding="utf-8") as f:
                    f.writelines(json.dumps(entry, sort_keys=True) + "\n" for entry in kept)

            atomic_write(path, write)

    def log_provenance(self, run_dir: str, iteration: int, batch: Sequence[Triple]):
        path = self.path(run_dir, RS.Files.PROVENANCE)
        for triple in batch:
            append_jsonl(path, { "iter": iteration, **triple.provenance })

    def provenance(self, run_dir: str) -> list[dict]:
        return read_jsonl(self.path(run_dir, RS.Files.PROVENANCE))

    # ENDREGION: [Logs]


    # REGION: [Records]

    def save_record(self, run_dir: str, record: RS.Record):
        append_jsonl(self.path(run_dir, RS.Files.RECORDS), record.as_anon_dict)
        logger.info(fmsg("Record saved", run_dir=normpath(run_dir), kind=record.kind))

    def records(self, run_dir: str, schema: Optional[type] = None) -> list[RS.Record]:
        """
        Retrieve the evaluation records of a run.

        Parameters:
            run_dir (str): The run directory.
            schema (type): Only return records of this schema.
        """
        records = run_utils.cast_by_kind(read_jsonl(self.path(run_dir, RS.Files.RECORDS)))
        if schema is not None:
            records = [r for r in records if isinstance(r, schema)]
        return records

    # ENDREGION: [Records]


    # REGION: [Checkpoints]

    def checkpoint_path(self, run_dir: str, iteration: int) -> str:
        return self.path(run_dir, f"{N.CHECKPOINT_PREFIX}{iteration}.pt")

    def checkpoints(self, run_dir: str) -> list[str]:
        """Periodic checkpoints sorted by iteration."""
        paths = glob.glob(os.path.join(run_dir, f"{N.CHECKPOINT_PREFIX}*.pt"))
        def iteration_of(p):
            stem = os.path.basename(p)[len(N.CHECKPOINT_PREFIX):-len(".pt")]
            return int(stem) if stem.isdigit() else -1
        return [normpath(p) for p in sorted(paths, key=iteration_of) if iteration_of(p) >= 0]

    def final_checkpoint(self, run_dir: str) -> Optional[str]:
        path = self.path(run_dir, RS.Files.FINAL)
        return path if os.path.isfile(path) else None

    def best_checkpoint(self, run_dir: str) -> Optional[str]:
        path = self.path(run_dir, RS.Files.BEST)
        return path if os.path.isfile(path) else None

    # ENDREGION: [Checkpoints]



# DOC: Singleton instance of the RunInterface class
RUNS = RunInterface()
