from django.db import models


class ExperimentRun(models.Model):
    """One invocation of a management command, kept for provenance."""

    STATUS_CHOICES = [
        ("ok", "Succeeded"),
        ("failed", "Failed"),
    ]

    command = models.CharField(max_length=32)  # train | predict | evaluate | curve | synth
    status = models.CharField(max_length=8, choices=STATUS_CHOICES, default="ok")

    # resolved flags > config file > settings defaults
    config = models.JSONField(default=dict, blank=True)
    # final objective, metric means, error message on failure
    summary = models.JSONField(default=dict, blank=True)

    output_dir = models.CharField(max_length=512, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-created_at"]

    def __str__(self):
        return f"{self.command} ({self.status}) {self.created_at:%Y-%m-%d %H:%M}"
