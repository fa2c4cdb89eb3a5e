"""Estimator-style wrappers around the learners.

Each estimator follows the scikit-learn conventions: constructor arguments are
hyperparameters, :meth:`fit` learns ``model_`` and related attributes, and the
fitted model answers :meth:`predict_proba` and :meth:`predict` for test
sequences.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .alergia import Fpta, ioalergia_learn
from .exact import ExactTeacher, learn_exact
from .mdp import Mdp
from .sampling import LearnerConfig, learn_sampling
from .sul import Sul
from .teacher import SampleStore, SamplingTeacher, TeacherConfig
from .validation import check_test_sequence


class _MdpPredictorMixin:
    def predict_proba(self, X) -> list:
        """Output distribution after each test sequence in ``X`` (None if unobservable)."""
        check_is_fitted(self, "model_")
        return [self.model_.semantics(check_test_sequence(s)) for s in X]

    def predict(self, X) -> list:
        """Most likely next output for each test sequence (None if unobservable)."""
        out = []
        for dist in self.predict_proba(X):
            out.append(max(sorted(dist), key=dist.__getitem__) if dist else None)
        return out


def _as_mdp(X) -> Mdp:
    if isinstance(X, Sul):
        return X.hidden_model
    if isinstance(X, Mdp):
        return X
    raise TypeError(f"expected an Mdp or Sul, got {type(X).__name__}")


class ExactLStarMDP(_MdpPredictorMixin, BaseEstimator):
    """Learner with an exact teacher; ``fit`` takes the true :class:`Mdp`."""

    def __init__(self, max_rounds: int = 10_000):
        self.max_rounds = max_rounds

    def fit(self, X, y=None):
        teacher = ExactTeacher(_as_mdp(X))
        self.model_, self.table_, self.log_ = learn_exact(teacher, self.max_rounds)
        self.n_states_ = self.model_.n_states
        self.n_output_queries_ = teacher.n_odq
        self.n_equivalence_queries_ = teacher.n_eq
        return self


class SamplingLStarMDP(_MdpPredictorMixin, BaseEstimator):
    """Learner with a sampling teacher; ``fit`` takes an :class:`Mdp` (wrapped in a seeded SUL) or a :class:`Sul`."""

    def __init__(
        self,
        alpha: float = 0.05,
        n_c: int = 20,
        n_resample: int = 300,
        n_retest: int = 300,
        n_test: int = 50,
        p_stop: float = 0.25,
        p_rand: float = 0.25,
        t_unamb: float = 0.99,
        r_min: int = 500,
        r_max: int = 4000,
        alpha_schedule=None,
        trim: bool = True,
        random_state=None,
    ):
        self.alpha = alpha
        self.n_c = n_c
        self.n_resample = n_resample
        self.n_retest = n_retest
        self.n_test = n_test
        self.p_stop = p_stop
        self.p_rand = p_rand
        self.t_unamb = t_unamb
        self.r_min = r_min
        self.r_max = r_max
        self.alpha_schedule = alpha_schedule
        self.trim = trim
        self.random_state = random_state

    def teacher_config(self) -> TeacherConfig:
        return TeacherConfig(
            n_c=self.n_c,
            n_resample=self.n_resample,
            n_test=self.n_test,
            n_retest=self.n_retest,
            p_stop=self.p_stop,
            p_rand=self.p_rand,
        ).validate()

    def learner_config(self) -> LearnerConfig:
        return LearnerConfig(
            alpha=self.alpha,
            t_unamb=self.t_unamb,
            r_min=self.r_min,
            r_max=self.r_max,
            alpha_schedule=self.alpha_schedule,
            trim=self.trim,
        ).validate()

    def fit(self, X, y=None):
        sul = X if isinstance(X, Sul) else Sul(_as_mdp(X), self.random_state)
        teacher = SamplingTeacher(sul, self.teacher_config(), alpha=self.alpha)
        self.model_, self.table_, self.log_ = learn_sampling(teacher, self.learner_config())
        self.teacher_ = teacher
        self.store_ = teacher.store
        self.n_states_ = self.model_.n_states - 1
        self.n_outputs_ = sul.n_outputs
        self.n_traces_ = sul.n_resets
        return self


class IOAlergia(_MdpPredictorMixin, BaseEstimator):
    """Passive state-merging learner; ``fit`` takes traces, ``(trace, count)`` pairs, a sample store or an FPTA."""

    def __init__(self, eps=None):
        self.eps = eps

    def fit(self, X, y=None):
        if not isinstance(X, (Fpta, SampleStore)):
            X = list(X)
            if not X:
                raise ValueError("cannot learn from an empty set of traces")
        self.model_ = ioalergia_learn(X, self.eps)
        self.n_states_ = self.model_.n_states
        return self
