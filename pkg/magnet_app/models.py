from django.db import models


class EvaluationRun(models.Model):
    """One recorded command run (stored only when --record is given)."""

    COMMAND_CHOICES = [
        ('eval_stem', 'StEM evaluation'),
        ('eval_mtgs', 'MTGS evaluation'),
        ('eval_retrieval', 'Retrieval evaluation'),
        ('eval_text', 'Text alignment evaluation'),
        ('select_frames', 'Salient frame selection'),
        ('retrieve', 'Retrieval'),
        ('pipeline_run', 'Grounded QA pipeline'),
        ('validate', 'Schema validation'),
    ]
    command = models.CharField(max_length=50, choices=COMMAND_CHOICES)
    parameters = models.JSONField(default=dict)
    summary = models.JSONField(default=dict)
    report_sha256 = models.CharField(max_length=64)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.command} - {self.created_at}"
