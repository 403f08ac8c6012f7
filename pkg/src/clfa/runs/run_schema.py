import math
from typing import Optional

from clfa.common import names as N
from clfa.common.errors import argument_error, data_error


class Files():
    """
    Files of a run directory.
    """

    CONFIG = N.CONFIG_SNAPSHOT
    METRICS = N.METRICS_LOG
    PROVENANCE = N.PROVENANCE_LOG
    RECORDS = N.RECORDS_LOG
    FINAL = N.FINAL_CHECKPOINT
    BEST = N.BEST_CHECKPOINT


class Record():
    """
    Base record of a run directory log.
    """

    def __init__(self, _id: Optional[str] = None):
        self._id = _id

    @property
    def kind(self) -> str:
        return type(self).__name__

    @property
    def as_dict(self):
        """
        Convert the record to a dictionary tagged with its kind.
        """
        dict_obj = dict(self.__dict__)
        dict_obj["kind"] = self.kind
        return dict_obj

    @property
    def as_anon_dict(self):
        dict_obj = self.as_dict
        if dict_obj.get("_id") is None:
            _ = dict_obj.pop("_id")
        return dict_obj

    @classmethod
    def from_dict(cls, d):
        d = { k: v for k, v in d.items() if k != "kind" }
        return cls(**d)



def _check_accuracy(name: str, value: float):
    if value is None or not (0.0 <= value <= 1.0) or math.isnan(value):
        raise data_error(f"Accuracy {name}={value} outside [0, 1].", name=name)


class MetricsRecord(Record):
    """
    Per-target accuracies of one evaluation, with their unweighted mean.
    """

    def __init__(
            self,
            protocol: str,
            per_target: dict[str, float],
            seed: Optional[int] = None,
            checkpoint_ref: Optional[str] = None,
            average: Optional[float] = None,
            selection: Optional[str] = None,           # DOC: model-selection rule that picked the checkpoint
            **kwargs
        ):
        super().__init__(**kwargs)
        if protocol not in N.PROTOCOLS:
            raise argument_error(f"Unknown protocol '{protocol}', expected one of {list(N.PROTOCOLS)}.")
        if len(per_target) == 0:
            raise data_error("A metrics record needs at least one target.")
        for name, value in per_target.items():
            _check_accuracy(name, value)
        mean = sum(per_target.values()) / len(per_target)
        if average is not None and abs(average - mean) > 1e-9:
            raise data_error(f"average {average} differs from the mean of per-target accuracies {mean}.")
        self.protocol = protocol
        self.per_target = { k: float(v) for k, v in per_target.items() }
        self.average = mean
        self.seed = seed
        self.checkpoint_ref = checkpoint_ref
        self.selection = selection


class ProbeReport(Record):
    """
    Linear-probe accuracies on one feature slice.
    """

    def __init__(
            self,
            probe_target: str,
            train_acc: float,
            heldout_acc: float,
            chance: float,
            dataset: Optional[str] = None,
            checkpoint_ref: Optional[str] = None,
            **kwargs
        ):
        super().__init__(**kwargs)
        if probe_target not in N.PROBE_TARGETS:
            raise argument_error(f"Unknown probe target '{probe_target}', expected one of {list(N.PROBE_TARGETS)}.")
        _check_accuracy("train_acc", train_acc)
        _check_accuracy("heldout_acc", heldout_acc)
        self.probe_target = probe_target
        self.train_acc = float(train_acc)
        self.heldout_acc = float(heldout_acc)
        self.chance = float(chance)
        self.dataset = dataset
        self.checkpoint_ref = checkpoint_ref


SCHEMAS = { schema.__name__: schema for schema in (MetricsRecord, ProbeReport) }
