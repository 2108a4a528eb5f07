"""System identification: NLMS and diagonal-Kalman baselines, the Kalman
filter/smoother pair, the EM parameter learner, and the segmented pipeline."""

from .baselines import diag_kalman_run, nlms_run
from .em import SegmentFit, em_fit_segment, em_mstep
from .engine import backward_pass, forward_pass
from .kalman import (FilterPass, SmoothPass, kalman_backward, kalman_forward,
                     log_likelihood, stacked_regressors)
from .params import StateSpaceParams, StatsAccumulator, SufficientStats
from .segments import (ProposedResult, Segment, SegmentPlan, default_workers,
                       identify_proposed, plan_segments)

__all__ = [
    "FilterPass", "ProposedResult", "Segment", "SegmentFit", "SegmentPlan",
    "SmoothPass", "StateSpaceParams", "StatsAccumulator", "SufficientStats",
    "backward_pass", "default_workers", "diag_kalman_run", "em_fit_segment",
    "em_mstep", "forward_pass", "identify_proposed", "kalman_backward",
    "kalman_forward", "log_likelihood", "nlms_run", "plan_segments",
    "stacked_regressors",
]
