from fockdyn.experiments.config import ExperimentConfig, load_config, parse_config
from fockdyn.experiments.runner import (ScanResult, echo_experiment, ensemble_report, envelope,
                                        fock_scan, run_experiment, scan_experiment)

__all__ = ["ExperimentConfig", "ScanResult", "echo_experiment", "ensemble_report", "envelope",
           "fock_scan", "load_config", "parse_config", "run_experiment", "scan_experiment"]
