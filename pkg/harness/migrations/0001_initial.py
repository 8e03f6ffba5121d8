# Generated by Django 4.2.7

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ReferenceSolution',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('digest', models.CharField(help_text='SHA-256 of the case file, η and tolerance.', max_length=64, unique=True)),
                ('case_path', models.CharField(help_text='Case file the reference was computed from.', max_length=500)),
                ('loss_weight', models.FloatField(help_text='η used in the objective.')),
                ('tolerance', models.FloatField(help_text='Interior-point KKT tolerance of the reference solve.')),
                ('values', models.JSONField(help_text='x* keyed by global variable label.')),
                ('cost', models.FloatField(help_text='Generation cost C1 in $.')),
                ('losses', models.FloatField(help_text='Network losses C2 in MW.')),
                ('objective', models.FloatField(help_text='C1 + η·C2.')),
                ('solve_time', models.FloatField(default=0.0, help_text='Wall time of the reference solve in seconds.')),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('case_path', models.CharField(max_length=500)),
                ('algorithm', models.CharField(choices=[('centralized', 'Centralized'), ('admm', 'ADMM'), ('aladin-exact', 'ALADIN (exact Hessian)'), ('aladin-bfgs', 'ALADIN (BFGS)')], max_length=20)),
                ('status', models.CharField(choices=[('converged', 'Converged'), ('max-iter', 'Iteration cap'), ('diverged', 'Diverged')], max_length=10)),
                ('parameters', models.JSONField(default=dict, help_text='ρ, μ, ε, iteration cap and threads used.')),
                ('iterations', models.PositiveIntegerField(default=0)),
                ('wall_time', models.FloatField(default=0.0, help_text='Seconds, excluding case parsing.')),
                ('cost', models.FloatField(blank=True, help_text='C1 in $.', null=True)),
                ('cost_gap', models.FloatField(blank=True, null=True)),
                ('losses', models.FloatField(blank=True, help_text='C2 in MW.', null=True)),
                ('losses_gap', models.FloatField(blank=True, null=True)),
                ('distance', models.FloatField(blank=True, help_text='‖x − x*‖∞ on the shared variables.', null=True)),
                ('message', models.TextField(blank=True)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('reference', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='runs', to='harness.referencesolution')),
            ],
            options={
                'ordering': ['created_at'],
            },
        ),
    ]
