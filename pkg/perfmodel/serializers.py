"""
Django REST Framework serializers validating normalized configuration values.
"""

from rest_framework import serializers

SOLVER_METHODS = ('auto', 'direct', 'iterative')


class PositiveFloatField(serializers.FloatField):
    """Float strictly greater than zero."""

    default_error_messages = {
        'not_positive': 'Ensure this value is greater than 0.',
    }

    def to_internal_value(self, data):
        value = super().to_internal_value(data)
        if not value > 0:
            self.fail('not_positive')
        return value


class MicroConfigSerializer(serializers.Serializer):
    """Container layer parameters, rates already in the base time unit."""
    users = serializers.IntegerField(min_value=1, default=1)
    arrival_rate = serializers.FloatField(min_value=0)
    instantiation_rate = PositiveFloatField()
    completion_rate = PositiveFloatField()
    min_vms = serializers.IntegerField(min_value=1)
    max_vms = serializers.IntegerField(min_value=1, required=False)
    quota = serializers.IntegerField(min_value=1, required=False)
    containers_per_vm = serializers.IntegerField(min_value=1)
    high_util = serializers.FloatField(min_value=0, max_value=1)
    low_util = serializers.FloatField(min_value=0, max_value=1)

    def validate(self, attrs):
        has_max, has_quota = 'max_vms' in attrs, 'quota' in attrs
        if has_max == has_quota:
            raise serializers.ValidationError({'max_vms': 'Give exactly one of max_vms or quota.'})
        if has_quota:
            attrs['max_vms'] = attrs.pop('quota') // attrs['containers_per_vm']
            if attrs['max_vms'] < 1:
                raise serializers.ValidationError({'quota': 'Quota is smaller than one VM.'})
        if attrs['min_vms'] > attrs['max_vms']:
            raise serializers.ValidationError({'min_vms': 'min_vms must not exceed max_vms.'})
        if not attrs['high_util'] > 0:
            raise serializers.ValidationError({'high_util': 'Ensure this value is greater than 0.'})
        if not attrs['low_util'] < 1:
            raise serializers.ValidationError({'low_util': 'Ensure this value is less than 1.'})
        if not attrs['low_util'] < attrs['high_util']:
            raise serializers.ValidationError({'low_util': 'low_util must be below high_util.'})
        return attrs


class MacroConfigSerializer(serializers.Serializer):
    """IaaS layer parameters."""
    arrival_rate = PositiveFloatField()
    queue_size = serializers.IntegerField(min_value=1)
    lookup_rate = PositiveFloatField()
    pool_size = serializers.IntegerField(min_value=1)
    vms_per_pm = serializers.IntegerField(min_value=1)
    provisioning_rate = PositiveFloatField()
    completion_rate = PositiveFloatField()


class SolverConfigSerializer(serializers.Serializer):
    max_err = PositiveFloatField(required=False)
    max_outer = serializers.IntegerField(min_value=1, required=False)
    max_inner = serializers.IntegerField(min_value=1, required=False)
    initial_success_prob = serializers.FloatField(min_value=0, max_value=1, required=False)
    initial_acquire_rate = PositiveFloatField(required=False)
    residual_tol = PositiveFloatField(required=False)
    method = serializers.ChoiceField(choices=SOLVER_METHODS, default='auto')
    max_states = serializers.IntegerField(min_value=1, required=False)


class SimConfigSerializer(serializers.Serializer):
    horizon = PositiveFloatField(required=False)
    warmup_fraction = serializers.FloatField(min_value=0, max_value=0.9, required=False)
    replications = serializers.IntegerField(min_value=1, required=False)
    seed = serializers.IntegerField(min_value=0, required=False)
    immediate_threshold = serializers.FloatField(min_value=0, required=False)


class SystemConfigSerializer(serializers.Serializer):
    time_unit = serializers.ChoiceField(choices=('second', 'minute', 'hour', 'day'))
    micro = MicroConfigSerializer()
    macro = MacroConfigSerializer()
    solver = SolverConfigSerializer(required=False)
    sim = SimConfigSerializer(required=False)


class SweepAxisSerializer(serializers.Serializer):
    path = serializers.CharField()
    min = serializers.FloatField()
    max = serializers.FloatField()
    steps = serializers.IntegerField(min_value=2)
    unit = serializers.CharField(required=False, allow_blank=True)

    def validate(self, attrs):
        if attrs['max'] < attrs['min']:
            raise serializers.ValidationError({'max': 'max must not be below min.'})
        return attrs


def first_error(errors, prefix: str = ''):
    """Flatten DRF's nested error structure to its first (field path, message)."""
    if isinstance(errors, dict):
        for key, value in errors.items():
            name = prefix if key == 'non_field_errors' else (f"{prefix}.{key}" if prefix else key)
            return first_error(value, name)
    if isinstance(errors, (list, tuple)) and errors:
        return first_error(errors[0], prefix)
    return prefix or 'config', str(errors)
