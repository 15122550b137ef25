from django.contrib import admin

from .models import Experiment, ReductionResult


class ReductionResultInline(admin.TabularInline):
    model = ReductionResult
    extra = 0
    readonly_fields = ['nodes', 'edges', 'n_bots', 'strategy', 'mean_reduction', 'std_reduction']


@admin.register(Experiment)
class ExperimentAdmin(admin.ModelAdmin):
    list_display = ['name', 'master_seed', 'runs', 'created_at', 'completed_at']
    search_fields = ['name', 'output_dir']
    inlines = [ReductionResultInline]


@admin.register(ReductionResult)
class ReductionResultAdmin(admin.ModelAdmin):
    list_display = ['experiment', 'strategy', 'n_bots', 'mean_reduction', 'std_reduction']
    list_filter = ['strategy']
