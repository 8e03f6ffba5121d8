from rest_framework import serializers

from .models import ExperimentRun

SUMMARY_COLUMNS = [
    'algorithm', 'status', 'iterations', 'wall_time', 'distance',
    'cost', 'cost_gap', 'losses', 'losses_gap',
]


class ExperimentRunSerializer(serializers.ModelSerializer):
    """Maps a stored run to one summary.csv row."""

    class Meta:
        model = ExperimentRun
        fields = SUMMARY_COLUMNS
        read_only_fields = SUMMARY_COLUMNS
