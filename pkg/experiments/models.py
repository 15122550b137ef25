from django.db import models
from django.utils import timezone
import json

from intervention.bots import PlacementStrategy


class Experiment(models.Model):
    """A recorded sweep: its resolved settings and where its files went"""
    name = models.CharField(max_length=255, blank=True)
    master_seed = models.BigIntegerField()
    runs = models.PositiveIntegerField(default=5)

    # Resolved settings as JSON text
    config = models.TextField()
    output_dir = models.CharField(max_length=500)

    created_at = models.DateTimeField(auto_now_add=True)
    completed_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.name or 'Experiment'} (seed {self.master_seed}, {self.runs} runs)"

    def get_config(self):
        return json.loads(self.config) if self.config else {}

    def record_table(self, table):
        """Store every row of a ReductionTable and mark the experiment complete"""
        results = [
            ReductionResult(
                experiment=self,
                nodes=row.nodes,
                edges=row.edges,
                n_bots=row.n_bots,
                strategy=row.strategy,
                mean_reduction=row.mean,
                std_reduction=row.std,
            )
            for row in table.rows
        ]
        ReductionResult.objects.bulk_create(results)
        self.completed_at = timezone.now()
        self.save(update_fields=['completed_at'])
        return results


class ReductionResult(models.Model):
    """Mean and spread of the percentage reduction for one (strategy, bot count) cell"""
    experiment = models.ForeignKey(Experiment, on_delete=models.CASCADE, related_name='results')
    nodes = models.PositiveIntegerField()
    edges = models.PositiveBigIntegerField()
    n_bots = models.PositiveIntegerField()
    strategy = models.CharField(max_length=10, choices=PlacementStrategy.choices)
    mean_reduction = models.FloatField()
    std_reduction = models.FloatField()

    class Meta:
        ordering = ['strategy', 'n_bots']
        unique_together = ['experiment', 'strategy', 'n_bots']

    def __str__(self):
        return f"{self.get_strategy_display()} with {self.n_bots} bots: {self.mean_reduction:.2f}%"
