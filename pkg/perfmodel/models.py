"""
Run ledger: one row per recorded solve, sweep, simulation or validation.

Forgotten runs stay in the table with `forgotten_at` set; `runs --forget`
never removes rows.
"""

from django.db import models
from django.utils import timezone
from django.utils.translation import gettext_lazy as _


class AnalysisRunQuerySet(models.QuerySet):
    def remembered(self):
        return self.filter(forgotten_at__isnull=True)

    def forgotten(self):
        return self.filter(forgotten_at__isnull=False)

    def of_kind(self, kind: str = None):
        return self.filter(kind=kind) if kind else self

    def for_config(self, config_hash: str):
        return self.filter(config_hash=config_hash)


class AnalysisRun(models.Model):
    """
    A single CLI invocation and its outcome.
    """
    KIND_CHOICES = [
        ('solve', _('Solve')),
        ('sweep', _('Sweep')),
        ('simulate', _('Simulate')),
        ('validate', _('Validate')),
    ]
    STATUS_CHOICES = [
        ('pending', _('Pending')),
        ('running', _('Running')),
        ('completed', _('Completed')),
        ('not_converged', _('Not Converged')),
        ('failed', _('Failed')),
    ]

    kind = models.CharField(
        max_length=20,
        choices=KIND_CHOICES,
        verbose_name=_("Kind"),
        help_text=_("Which command produced this run")
    )
    config_path = models.CharField(
        max_length=500,
        blank=True,
        verbose_name=_("Config Path"),
        help_text=_("Configuration file the run was started with")
    )
    config_hash = models.CharField(
        max_length=64,
        blank=True,
        db_index=True,
        verbose_name=_("Config Hash"),
        help_text=_("SHA-256 of the normalized configuration")
    )
    run_status = models.CharField(
        max_length=20,
        choices=STATUS_CHOICES,
        default='pending',
        verbose_name=_("Run Status"),
        help_text=_("Current run status")
    )
    exit_code = models.SmallIntegerField(
        blank=True,
        null=True,
        verbose_name=_("Exit Code"),
        help_text=_("Process exit status reported to the shell")
    )
    summary = models.JSONField(
        default=dict,
        blank=True,
        verbose_name=_("Summary"),
        help_text=_("Headline metrics or the failure message")
    )
    recorded_at = models.DateTimeField(
        auto_now_add=True,
        verbose_name=_("Recorded At")
    )
    started_at = models.DateTimeField(
        blank=True,
        null=True,
        verbose_name=_("Started At")
    )
    completed_at = models.DateTimeField(
        blank=True,
        null=True,
        verbose_name=_("Completed At")
    )
    forgotten_at = models.DateTimeField(
        blank=True,
        null=True,
        verbose_name=_("Forgotten At"),
        help_text=_("Set when the run was hidden with `runs --forget`")
    )

    objects = AnalysisRunQuerySet.as_manager()

    class Meta:
        db_table = 'analysis_runs'
        verbose_name = _("Analysis Run")
        verbose_name_plural = _("Analysis Runs")
        ordering = ['-recorded_at', '-id']

    def __str__(self):
        return f"{self.kind} {self.config_path} ({self.run_status})"

    def start_run(self):
        self.run_status = 'running'
        self.started_at = timezone.now()
        self.save(update_fields=['run_status', 'started_at'])

    def complete_run(self, exit_code: int = 0, summary: dict = None):
        """Mark the run finished; exit code 2 means the fixed point was not reached."""
        self.run_status = {0: 'completed', 2: 'not_converged'}.get(exit_code, 'failed')
        self.exit_code = exit_code
        self.summary = summary or {}
        self.completed_at = timezone.now()
        self.save(update_fields=['run_status', 'exit_code', 'summary', 'completed_at'])

    def fail_run(self, message: str):
        self.run_status = 'failed'
        self.exit_code = 1
        self.summary = {'error': message}
        self.completed_at = timezone.now()
        self.save(update_fields=['run_status', 'exit_code', 'summary', 'completed_at'])

    def forget(self):
        self.forgotten_at = timezone.now()
        self.save(update_fields=['forgotten_at'])

    def recall(self):
        self.forgotten_at = None
        self.save(update_fields=['forgotten_at'])

    @property
    def is_forgotten(self) -> bool:
        return self.forgotten_at is not None

    @property
    def duration(self):
        """Wall time in seconds, None while unfinished."""
        if self.started_at and self.completed_at:
            return (self.completed_at - self.started_at).total_seconds()
        return None
