from dataclasses import dataclass, fields

from django.conf import settings

from core.exceptions import ConfigurationError


@dataclass(frozen=True)
class SolverSettings:
    tol: float = 1e-8
    acceptable_tol: float = 1e-6
    max_iter: int = 200
    mu_init: float = 0.1
    mu_reduction: float = 0.2
    mu_superlinear: float = 1.5
    barrier_tol_factor: float = 10.0
    warm_mu_init: float = 1e-4
    warm_bound_push: float = 1e-6
    tau_min: float = 0.99
    activity_tol: float = 1e-6
    bound_push: float = 1e-4
    reg_init: float = 1e-8
    reg_growth: float = 10.0
    reg_max: float = 1e10
    obj_scaling_max_gradient: float = 100.0

    def __post_init__(self):
        for item in fields(self):
            if not getattr(self, item.name) > 0:
                raise ConfigurationError(f"Solver setting '{item.name}' must be positive.")
        if self.activity_tol < self.tol:
            raise ConfigurationError("The activity tolerance must not be below the KKT tolerance.")
        if not 0 < self.mu_reduction < 1 or not 0 < self.tau_min < 1:
            raise ConfigurationError("Barrier reduction and fraction-to-boundary factors must lie in (0, 1).")

    @classmethod
    def from_settings(cls, **overrides):
        """Defaults from settings.NLP_SOLVER, overridden by keyword."""
        values = {name.lower(): value for name, value in settings.NLP_SOLVER.items()}
        values.update({name: value for name, value in overrides.items() if value is not None})
        known = {item.name for item in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigurationError(f"Unknown solver settings: {', '.join(unknown)}.")
        return cls(**values)
