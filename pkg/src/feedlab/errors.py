"""Exception hierarchy shared across feedlab modules."""


class FeedlabError(Exception):
    """Base class for all feedlab errors."""

    code = "feedlab_error"


class EmptyBatch(FeedlabError):
    code = "empty_batch"


class DuplicatePostId(FeedlabError):
    code = "duplicate_post_id"


class BackendUnavailable(FeedlabError):
    code = "backend_unavailable"


class UnscoredBatch(FeedlabError):
    code = "unscored_batch"


class UnknownPrompt(FeedlabError):
    code = "unknown_prompt"


class QuotasFull(FeedlabError):
    code = "quotas_full"


class OutOfStudyWindow(FeedlabError):
    code = "out_of_study_window"


class NoViews(FeedlabError):
    code = "no_views"


class MissingScore(FeedlabError):
    code = "missing_score"


class RankDeficient(FeedlabError):
    code = "rank_deficient"


class NonConvergence(FeedlabError):
    code = "non_convergence"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateDesign(FeedlabError):
    code = "degenerate_design"


class InsufficientData(FeedlabError):
    code = "insufficient_data"


class AllCovariatesDropped(FeedlabError):
    code = "all_covariates_dropped"


class DegenerateArm(FeedlabError):
    code = "degenerate_arm"


class InvalidP(FeedlabError):
    code = "invalid_p"


class OverlappingTiers(FeedlabError):
    code = "overlapping_tiers"


class EmptySample(FeedlabError):
    code = "empty_sample"


class DegenerateModerator(FeedlabError):
    code = "degenerate_moderator"


class PromptExpired(FeedlabError):
    code = "prompt_expired"


class UnknownParticipant(FeedlabError):
    code = "unknown_participant"


class StudyEnded(FeedlabError):
    code = "study_ended"


class MalformedBatch(FeedlabError):
    code = "malformed_batch"
