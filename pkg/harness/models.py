from django.db import models


class ReferenceSolution(models.Model):
    """
    Cached centralized solution of one case, keyed by the case file digest,
    the loss weight and the solver tolerance.
    """
    digest = models.CharField(max_length=64, unique=True, help_text="SHA-256 of the case file, η and tolerance.")
    case_path = models.CharField(max_length=500, help_text="Case file the reference was computed from.")
    loss_weight = models.FloatField(help_text="η used in the objective.")
    tolerance = models.FloatField(help_text="Interior-point KKT tolerance of the reference solve.")
    values = models.JSONField(help_text="x* keyed by global variable label.")
    cost = models.FloatField(help_text="Generation cost C1 in $.")
    losses = models.FloatField(help_text="Network losses C2 in MW.")
    objective = models.FloatField(help_text="C1 + η·C2.")
    solve_time = models.FloatField(default=0.0, help_text="Wall time of the reference solve in seconds.")
    iterations = models.PositiveIntegerField(default=0, help_text="Interior-point iterations of the reference solve.")
    converged = models.BooleanField(default=True, help_text="False when the solve was accepted at the iteration cap.")
    created_at = models.DateTimeField(auto_now_add=True)

    def __str__(self):
        return f"{self.case_path} (η={self.loss_weight:g})"

    class Meta:
        ordering = ['-created_at']


class ExperimentRun(models.Model):
    """
    One algorithm run on one case, as summarized in summary.csv.
    """
    ALGORITHM_CHOICES = [
        ('centralized', 'Centralized'),
        ('admm', 'ADMM'),
        ('aladin-exact', 'ALADIN (exact Hessian)'),
        ('aladin-bfgs', 'ALADIN (BFGS)'),
    ]
    STATUS_CHOICES = [
        ('converged', 'Converged'),
        ('max-iter', 'Iteration cap'),
        ('diverged', 'Diverged'),
    ]

    case_path = models.CharField(max_length=500)
    algorithm = models.CharField(max_length=20, choices=ALGORITHM_CHOICES)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES)
    parameters = models.JSONField(default=dict, help_text="ρ, μ, ε, iteration cap and threads used.")
    iterations = models.PositiveIntegerField(default=0)
    wall_time = models.FloatField(default=0.0, help_text="Seconds, excluding case parsing.")
    cost = models.FloatField(null=True, blank=True, help_text="C1 in $.")
    cost_gap = models.FloatField(null=True, blank=True)
    losses = models.FloatField(null=True, blank=True, help_text="C2 in MW.")
    losses_gap = models.FloatField(null=True, blank=True)
    distance = models.FloatField(null=True, blank=True, help_text="‖x − x*‖∞ on the shared variables.")
    message = models.TextField(blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    reference = models.ForeignKey(
        ReferenceSolution,
        null=True,
        blank=True,
        on_delete=models.SET_NULL,
        related_name='runs',
    )
    created_at = models.DateTimeField(auto_now_add=True)

    def __str__(self):
        return f"{self.algorithm} on {self.case_path}: {self.status}"

    class Meta:
        ordering = ['created_at']
