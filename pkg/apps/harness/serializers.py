"""
Run config DRF serializers.

Validation for the flat run config: types, per-field bounds, cross-field
rules and rejection of unknown keys.
"""

from rest_framework import serializers

from apps.decoding.coupler import CouplerMode
from apps.harness.config import AGG_INIT_CHOICES, RunConfig

U64_MAX = (1 << 64) - 1


class CommaIntegerListField(serializers.Field):
    """'2,6,10' <-> (2, 6, 10); an empty string is the empty tuple."""

    default_error_messages = {
        'invalid': 'Expected comma-separated integers.',
    }

    def to_internal_value(self, data):
        if isinstance(data, (list, tuple)):
            items = list(data)
        else:
            items = [part.strip() for part in str(data).split(',') if part.strip()]
        try:
            return tuple(int(item) for item in items)
        except (TypeError, ValueError):
            self.fail('invalid')

    def to_representation(self, value):
        return ','.join(str(item) for item in value)


class RunConfigSerializer(serializers.Serializer):
    """
    Serializer for RunConfig.

    Every field is optional and falls back to the RunConfig default.
    """

    seed = serializers.IntegerField(min_value=0, max_value=U64_MAX, required=False)
    grid_side = serializers.IntegerField(min_value=2, required=False)
    num_objects = serializers.IntegerField(min_value=1, required=False)
    object_types = serializers.IntegerField(min_value=1, required=False)
    vocab_size = serializers.IntegerField(min_value=1, required=False)
    instr_len = serializers.IntegerField(min_value=3, required=False)
    chunk_len = serializers.IntegerField(min_value=2, required=False)
    arms = serializers.IntegerField(min_value=1, required=False)
    noise_std = serializers.FloatField(min_value=0.0, required=False)
    sparsity_ratio = serializers.IntegerField(min_value=1, required=False)
    cue_tokens = serializers.IntegerField(min_value=1, required=False)
    pruning = serializers.BooleanField(required=False)
    agg_rounds = serializers.IntegerField(min_value=1, required=False)
    agg_init = serializers.ChoiceField(choices=AGG_INIT_CHOICES, required=False)
    sem_width = serializers.IntegerField(min_value=1, required=False)
    spa_width = serializers.IntegerField(min_value=1, required=False)
    text_width = serializers.IntegerField(min_value=1, required=False)
    tower_blocks = serializers.IntegerField(min_value=0, required=False)
    tower_heads = serializers.IntegerField(min_value=1, required=False)
    hook_depths = CommaIntegerListField(required=False)
    dense_fusion = serializers.BooleanField(required=False)
    fusion_hidden = serializers.IntegerField(min_value=1, required=False)
    decoder_layers = serializers.IntegerField(min_value=0, required=False)
    decoder_width = serializers.IntegerField(min_value=1, required=False)
    decoder_heads = serializers.IntegerField(min_value=1, required=False)
    mode = serializers.ChoiceField(choices=[mode.value for mode in CouplerMode], required=False)
    learning_rate = serializers.FloatField(min_value=0.0, required=False)
    steps = serializers.IntegerField(min_value=0, required=False)
    batch_size = serializers.IntegerField(min_value=1, required=False)
    warmup_frac = serializers.FloatField(min_value=0.0, max_value=1.0, required=False)
    eval_interval = serializers.IntegerField(min_value=1, required=False)
    train_count = serializers.IntegerField(min_value=1, required=False)
    eval_count = serializers.IntegerField(min_value=1, required=False)
    bench_repetitions = serializers.IntegerField(min_value=5, required=False)

    def to_internal_value(self, data):
        """Reject keys that are not config fields before field validation."""
        unknown = sorted(set(data) - set(self.fields))
        if unknown:
            raise serializers.ValidationError({key: ['Unknown config key.'] for key in unknown})
        return super().to_internal_value(data)

    def validate_hook_depths(self, value):
        """Validate hook depths are strictly increasing and non-negative."""
        if any(depth < 0 for depth in value):
            raise serializers.ValidationError('Hook depths must be non-negative.')
        if any(b <= a for a, b in zip(value, value[1:])):
            raise serializers.ValidationError('Hook depths must be strictly increasing.')
        return value

    def validate(self, attrs):
        """Cross-field rules over the merged (defaults + given) values."""
        merged = {**{key: getattr(RunConfig, key) for key in RunConfig.keys()}, **attrs}
        n = merged['grid_side'] ** 2
        errors = {}

        if merged['num_objects'] * 4 > n:
            errors['num_objects'] = f'At most N/4 = {n // 4} objects fit on the grid.'
        elif merged['num_objects'] > merged['object_types']:
            errors['num_objects'] = 'Objects have distinct types; raise object_types.'
        if merged['vocab_size'] <= 8 + merged['object_types']:
            errors['vocab_size'] = 'Vocabulary must leave at least one distractor id.'
        if n % merged['sparsity_ratio'] != 0:
            errors['sparsity_ratio'] = f'N = {n} is not divisible by {merged["sparsity_ratio"]}.'
        else:
            budget = n // merged['sparsity_ratio']
            if merged['cue_tokens'] > merged['instr_len']:
                errors['cue_tokens'] = 'cue_tokens cannot exceed instr_len.'
            elif budget - merged['cue_tokens'] < 1:
                errors['cue_tokens'] = (
                    f'N/R = {budget} leaves no anchor tokens for {merged["cue_tokens"]} cue tokens.'
                )
        if merged['hook_depths'] and merged['hook_depths'][-1] >= merged['tower_blocks']:
            errors['hook_depths'] = 'Hook depths must be below tower_blocks.'
        for width_key in ('sem_width', 'spa_width', 'text_width'):
            if merged[width_key] % merged['tower_heads'] != 0:
                errors[width_key] = 'Width must be divisible by tower_heads.'
        if merged['decoder_width'] % merged['decoder_heads'] != 0:
            errors['decoder_width'] = 'Width must be divisible by decoder_heads.'

        if errors:
            raise serializers.ValidationError(errors)
        return attrs

    def create(self, validated_data):
        """Build the RunConfig dataclass."""
        return RunConfig(**validated_data)
