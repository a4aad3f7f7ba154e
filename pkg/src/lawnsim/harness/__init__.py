from lawnsim.harness.config import Case, ExperimentSpec, default_spec, load_spec
from lawnsim.harness.runner import ResultTable, run_experiment, summarize

__all__ = ["Case", "ExperimentSpec", "ResultTable", "default_spec", "load_spec",
           "run_experiment", "summarize"]
