from django import forms
from pathlib import Path

from diffusion.engine import CADENCES
from intervention.bots import PlacementStrategy

SYNTHETIC = 'synthetic'
STRATEGY_CHOICES = [
    (PlacementStrategy.RANDOM.value, PlacementStrategy.RANDOM.label),
    (PlacementStrategy.LOWEST_INDEGREE.value, PlacementStrategy.LOWEST_INDEGREE.label),
]


def _split(value):
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value]
    return [part.strip() for part in str(value or '').split(',') if part.strip()]


class SimulationForm(forms.Form):
    """Validates the resolved settings of a single simulation"""
    name = forms.CharField(max_length=255, required=False)
    graph = forms.CharField(required=False, help_text='Edge list path; overrides the ER parameters')
    er_n = forms.IntegerField(min_value=1, required=False)
    er_p = forms.FloatField(min_value=0.0, max_value=1.0, required=False)
    amplifier_fraction = forms.FloatField(min_value=0.0, max_value=1.0)
    attenuator_fraction = forms.FloatField(min_value=0.0, max_value=1.0)
    copycat_fraction = forms.FloatField(min_value=0.0, max_value=1.0)
    changing_fraction = forms.FloatField(min_value=0.0, max_value=1.0)
    weeks = forms.IntegerField(min_value=1)
    hops_per_week = forms.IntegerField(min_value=1)
    input_bins = forms.IntegerField(min_value=1)
    seed_fraction = forms.FloatField(min_value=0.0, max_value=1.0)
    initial_toxicity_lo = forms.FloatField(min_value=0.0, max_value=1.0)
    initial_toxicity_hi = forms.FloatField(min_value=0.0, max_value=1.0)
    category_cadence = forms.ChoiceField(choices=[(c, c) for c in CADENCES])
    zero_clamped_active = forms.BooleanField(required=False)
    shift_dist = forms.CharField(help_text=f'"{SYNTHETIC}" or a shift-distribution CSV')
    transitions = forms.CharField(required=False, help_text='Transition CSV; Twitter defaults when empty')
    seed = forms.IntegerField(min_value=0)

    def _existing_file(self, field):
        value = self.cleaned_data.get(field)
        if value and not Path(value).is_file():
            raise forms.ValidationError(f'File not found: {value}')
        return value or None

    def clean_graph(self):
        return self._existing_file('graph')

    def clean_transitions(self):
        return self._existing_file('transitions')

    def clean_shift_dist(self):
        value = self.cleaned_data.get('shift_dist')
        if value == SYNTHETIC:
            return value
        return self._existing_file('shift_dist')

    def clean_seed_fraction(self):
        value = self.cleaned_data.get('seed_fraction')
        if value is not None and value <= 0:
            raise forms.ValidationError('Seed fraction must be positive')
        return value

    def clean(self):
        cleaned_data = super().clean()

        if not cleaned_data.get('graph') and not self.errors.get('graph'):
            if cleaned_data.get('er_n') is None or cleaned_data.get('er_p') is None:
                self.add_error('er_n', 'Give an edge list (graph) or both er_n and er_p.')

        fractions = [cleaned_data.get(f'{c}_fraction') for c in ('amplifier', 'attenuator', 'copycat')]
        if None not in fractions and abs(sum(fractions) - 1.0) > 1e-9:
            self.add_error('copycat_fraction', f'Category fractions must sum to 1, got {sum(fractions):.6f}')

        lo, hi = cleaned_data.get('initial_toxicity_lo'), cleaned_data.get('initial_toxicity_hi')
        if lo is not None and hi is not None and not 0.0 < lo <= hi:
            self.add_error('initial_toxicity_hi', f'Initial toxicity range [{lo}, {hi}] must satisfy 0 < lo <= hi')

        return cleaned_data


class ExperimentSpecForm(SimulationForm):
    """Adds the sweep settings: bot counts, strategies and runs"""
    bots = forms.CharField(help_text='Comma-separated bot counts')
    strategies = forms.CharField(help_text='Comma-separated placement strategies (rp, li)')
    runs = forms.IntegerField(min_value=1)
    fixed_graph = forms.BooleanField(required=False)

    def clean_bots(self):
        counts = []
        for part in _split(self.cleaned_data.get('bots')):
            try:
                count = int(part)
            except ValueError:
                raise forms.ValidationError(f'Bot count {part!r} is not an integer')
            if count < 1:
                raise forms.ValidationError(
                    f'Bot count {count} is not allowed; the baseline without bots is always run'
                )
            counts.append(count)
        if not counts:
            raise forms.ValidationError('At least one bot count is required')
        return sorted(set(counts))

    def clean_strategies(self):
        valid = dict(STRATEGY_CHOICES)
        strategies = []
        for part in _split(self.cleaned_data.get('strategies')):
            part = part.lower()
            if part not in valid:
                raise forms.ValidationError(f'Unknown strategy {part!r}; choose from {", ".join(valid)}')
            if part not in strategies:
                strategies.append(part)
        if not strategies:
            raise forms.ValidationError('At least one strategy is required')
        return strategies


def form_errors(form):
    """Flatten form errors into one line per field"""
    return '; '.join(f'{field}: {" ".join(messages)}' for field, messages in form.errors.items())
