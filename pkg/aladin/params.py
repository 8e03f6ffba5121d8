from dataclasses import dataclass, fields

from django.conf import settings

from core.exceptions import ConfigurationError

EXACT = 'exact'
BFGS = 'bfgs'
STANDARD_UPDATE = 'standard'
LITERAL_UPDATE = 'literal'


@dataclass(frozen=True)
class AladinParams:
    """
    Penalties, termination and Hessian options of one ALADIN run.

    `update_form` selects the primal update: 'literal' (the default) uses
    z⁺ = x + α₁(x − z) + α₂Δx, 'standard' uses z⁺ = z + α₁(x − z) + α₂Δx.
    """
    mode: str = EXACT
    rho: float = 1e2
    mu: float = 1e3
    max_iter: int = 200
    epsilon: float = 1e-4
    threads: int = 1
    hessian_floor: float = 1e-6
    bfgs_damping: float = 0.2
    rho_growth: float = 1.0
    rho_max: float = 1e8
    qp_regularization: float = 1e-10
    activity_tol: float = 1e-6
    alphas: tuple = (1.0, 1.0, 1.0)
    update_form: str = LITERAL_UPDATE
    keep_qp_history: bool = False

    def __post_init__(self):
        if self.mode not in (EXACT, BFGS):
            raise ConfigurationError(f"Unknown Hessian mode '{self.mode}'.")
        if self.update_form not in (STANDARD_UPDATE, LITERAL_UPDATE):
            raise ConfigurationError(f"Unknown update form '{self.update_form}'.")
        positive = ('rho', 'mu', 'epsilon', 'hessian_floor', 'qp_regularization', 'activity_tol')
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"ALADIN parameter '{name}' must be positive.")
        if self.max_iter < 0 or self.threads < 1:
            raise ConfigurationError("ALADIN needs max_iter >= 0 and threads >= 1.")
        if not 0 < self.bfgs_damping < 1:
            raise ConfigurationError("The BFGS damping threshold must lie in (0, 1).")
        if self.rho_growth < 1.0 or self.rho_max < self.rho:
            raise ConfigurationError("The rho ramp must be non-decreasing and capped above rho.")
        if len(self.alphas) != 3:
            raise ConfigurationError("Three step sizes are required.")

    @property
    def algorithm(self):
        return 'aladin-exact' if self.mode == EXACT else 'aladin-bfgs'

    @classmethod
    def from_settings(cls, mode=EXACT, **overrides):
        conf = settings.DISTRIBUTED
        defaults = conf['ALADIN_EXACT' if mode == EXACT else 'ALADIN_BFGS']
        values = {
            'mode': mode,
            'rho': defaults['RHO'],
            'mu': defaults['MU'],
            'max_iter': defaults['MAX_ITER'],
            'epsilon': conf['EPSILON'],
            'threads': conf['THREADS'],
            'hessian_floor': conf['HESSIAN_FLOOR'],
            'bfgs_damping': conf['BFGS_DAMPING'],
            'rho_growth': conf['RHO_GROWTH'],
            'rho_max': conf['RHO_MAX'],
            'qp_regularization': conf['QP_REGULARIZATION'],
            'update_form': conf['UPDATE_FORM'],
            'activity_tol': settings.NLP_SOLVER['ACTIVITY_TOL'],
        }
        values.update({name: value for name, value in overrides.items() if value is not None})
        unknown = set(values) - {item.name for item in fields(cls)}
        if unknown:
            raise ConfigurationError(f"Unknown ALADIN parameters: {', '.join(sorted(unknown))}.")
        return cls(**values)
