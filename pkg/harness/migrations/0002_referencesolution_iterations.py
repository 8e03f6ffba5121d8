# Generated by Django 4.2.7

from django.db import migrations, models


class Migration(migrations.Migration):

    dependencies = [
        ('harness', '0001_initial'),
    ]

    operations = [
        migrations.AddField(
            model_name='referencesolution',
            name='iterations',
            field=models.PositiveIntegerField(default=0, help_text='Interior-point iterations of the reference solve.'),
        ),
        migrations.AddField(
            model_name='referencesolution',
            name='converged',
            field=models.BooleanField(default=True, help_text='False when the solve was accepted at the iteration cap.'),
        ),
    ]
