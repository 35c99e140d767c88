from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from musebench.data.preprocess import Reducer, Scaler
from musebench.errors import ConfigError
from musebench.learn.model import Task
from musebench.search.muse import GridSpec, SearchArgs

CLASSIFY_FEAT_ANS = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4)]
REGRESS_FEAT_ANS = [(1, 2), (1, 3), (2, 2), (2, 3)]
SCA_RED = [
    (Scaler.STANDARD, Reducer.PCA),
    (Scaler.STANDARD, Reducer.ANOVA_F),
    (Scaler.MINMAX, Reducer.PCA),
    (Scaler.MINMAX, Reducer.ANOVA_F),
]


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="MUSEBENCH_", env_file=".env")

    seed: int = 0
    n_trials: int = 2
    # MUSE: locality radius and the rescale factors for tied / worse rounds
    epsilon: float = 0.02
    alpha: float = 0.9
    beta: float = 0.5
    depth: int = 3
    # Cap each instantiation at 2 * depth objective calls (the seed call is extra).
    strict_budget: bool = True
    workers: int = 1

    train_fraction: float = 0.8
    classify_dims: int = 4
    regress_dims: int = 2
    classify_iterations: int = 100
    regress_iterations: int = 10
    # Repeat the H layer on every feature-map repetition, not just the first.
    reapply_hadamard: bool = True

    feat_ans: list[tuple[int, int]] = Field(default_factory=lambda: list(CLASSIFY_FEAT_ANS))
    regress_feat_ans: list[tuple[int, int]] = Field(
        default_factory=lambda: list(REGRESS_FEAT_ANS)
    )
    sca_red: list[tuple[Scaler, Reducer]] = Field(default_factory=lambda: list(SCA_RED))

    tracediff_k: int = 3
    log_level: str = "INFO"


class RunConfig(BaseModel):
    """Validated configuration of one ``search`` run; echoed into the RunRecord."""

    model_config = ConfigDict(frozen=True)

    task: Task = Task.CLASSIFY
    dataset: str | None = None
    seed: int = 0
    n_trials: int = 2
    epsilon: float = 0.02
    alpha: float = 0.9
    beta: float = 0.5
    depth: int = 3
    strict_budget: bool = True
    workers: int = 1
    train_fraction: float = 0.8
    dims: int = 4
    iterations: int = 100
    reapply_hadamard: bool = True
    feat_ans: list[tuple[int, int]] = Field(default_factory=lambda: list(CLASSIFY_FEAT_ANS))
    sca_red: list[tuple[Scaler, Reducer]] = Field(default_factory=lambda: list(SCA_RED))
    baseline: bool = False
    out: str | None = None

    @model_validator(mode="after")
    def _check(self) -> RunConfig:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if not 0.0 < self.beta < self.alpha <= 1.0:
            raise ValueError(f"need 0 < beta < alpha <= 1, got alpha={self.alpha} beta={self.beta}")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.dims < 1 or self.iterations < 1:
            raise ValueError("dims and iterations must be positive")
        if not self.feat_ans or not self.sca_red:
            raise ValueError("grid lists must be non-empty")
        if any(fm < 1 or an < 1 for fm, an in self.feat_ans):
            raise ValueError("circuit repetitions must be >= 1")
        return self

    @classmethod
    def build(cls, settings: Settings | None = None, **overrides: Any) -> RunConfig:
        """Settings first, then any non-None override (CLI flags)."""
        settings = settings or Settings()
        task = Task(overrides.get("task") or Task.CLASSIFY)
        classify = task is Task.CLASSIFY
        values: dict[str, Any] = {
            "task": task,
            "seed": settings.seed,
            "n_trials": settings.n_trials,
            "epsilon": settings.epsilon,
            "alpha": settings.alpha,
            "beta": settings.beta,
            "depth": settings.depth,
            "strict_budget": settings.strict_budget,
            "workers": settings.workers,
            "train_fraction": settings.train_fraction,
            "dims": settings.classify_dims if classify else settings.regress_dims,
            "iterations": settings.classify_iterations if classify else settings.regress_iterations,
            "reapply_hadamard": settings.reapply_hadamard,
            "feat_ans": settings.feat_ans if classify else settings.regress_feat_ans,
            "sca_red": settings.sca_red,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**values)
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc

    def grid(self) -> GridSpec:
        return GridSpec(
            feat_ans=tuple(self.feat_ans), sca_red=tuple(self.sca_red), n_trials=self.n_trials
        )

    def search_args(self) -> SearchArgs:
        return SearchArgs.unit_box(
            self.dims, epsilon=self.epsilon, alpha=self.alpha, beta=self.beta, depth=self.depth
        )
