from .config import METHODS, RunConfig, load_config
from .metrics import metric_high_success_fraction, metric_tasks_above
from .runner import Experiment, RoundReport, Summary, run_experiment
