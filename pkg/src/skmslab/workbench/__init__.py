"""Model interchange, verification suites, report emission and the CLI."""

from .models import ModelSpec, build_model, model_digest
from .reports import emit_report
from .suites import SUITES, SuiteConfig, run_suite

__all__ = [
    "ModelSpec",
    "build_model",
    "model_digest",
    "emit_report",
    "SUITES",
    "SuiteConfig",
    "run_suite",
]
