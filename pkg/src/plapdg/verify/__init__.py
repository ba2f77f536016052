"""Numerical certification of the inverse estimates and algebraic lemmas."""

from .algebraic import check_algebraic, estimate_lemma21_constants
from .checks import (CheckReport, check_interval_lemma, check_markov,
                     check_qn_trace_inverse, check_trace_inverse)

__all__ = ["CheckReport", "check_markov", "check_interval_lemma",
           "check_trace_inverse", "check_qn_trace_inverse", "check_algebraic",
           "estimate_lemma21_constants"]
