# Generated by Django 5.1.7 on 2026-10-12 09:41

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('simulate', 'Truth and observations'), ('kb', 'Kalman-Bucy reference'), ('filter', 'Ensemble filter run'), ('consistency', 'Ensemble vs Kalman-Bucy sweep'), ('poc', 'Propagation of chaos sweep'), ('gain1d', '1-D gain fields'), ('bounds', 'A-priori bounds')], max_length=20)),
                ('scenario', models.CharField(blank=True, max_length=50)),
                ('config', models.JSONField(default=dict)),
                ('base_seed', models.BigIntegerField(default=0)),
                ('t_end', models.FloatField(blank=True, null=True)),
                ('n_steps', models.PositiveIntegerField(blank=True, null=True)),
                ('code_version', models.CharField(max_length=20)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('status', models.CharField(choices=[('running', 'Running'), ('succeeded', 'Succeeded'), ('invalid', 'Validation error'), ('failed', 'Numerical failure'), ('violated', 'Bound violation')], default='running', max_length=20)),
                ('exit_code', models.SmallIntegerField(blank=True, null=True)),
                ('message', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['command', 'scenario'], name='experiments_cmd_scen_idx')],
            },
        ),
    ]
