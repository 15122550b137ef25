# Generated by Django 4.2.20 on 2026-10-19 09:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Experiment',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(blank=True, max_length=255)),
                ('master_seed', models.BigIntegerField()),
                ('runs', models.PositiveIntegerField(default=5)),
                ('config', models.TextField()),
                ('output_dir', models.CharField(max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('completed_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='ReductionResult',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('nodes', models.PositiveIntegerField()),
                ('edges', models.PositiveBigIntegerField()),
                ('n_bots', models.PositiveIntegerField()),
                ('strategy', models.CharField(choices=[('baseline', 'Baseline (no bots)'), ('rp', 'Random Placement'), ('li', 'Lowest Indegree')], max_length=10)),
                ('mean_reduction', models.FloatField()),
                ('std_reduction', models.FloatField()),
                ('experiment', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='results', to='experiments.experiment')),
            ],
            options={
                'ordering': ['strategy', 'n_bots'],
                'unique_together': {('experiment', 'strategy', 'n_bots')},
            },
        ),
    ]
