# Generated by Django 4.2.7

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='AnalysisRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('solve', 'Solve'), ('sweep', 'Sweep'), ('simulate', 'Simulate'), ('validate', 'Validate')], help_text='Which command produced this run', max_length=20, verbose_name='Kind')),
                ('config_path', models.CharField(blank=True, help_text='Configuration file the run was started with', max_length=500, verbose_name='Config Path')),
                ('config_hash', models.CharField(blank=True, db_index=True, help_text='SHA-256 of the normalized configuration', max_length=64, verbose_name='Config Hash')),
                ('run_status', models.CharField(choices=[('pending', 'Pending'), ('running', 'Running'), ('completed', 'Completed'), ('not_converged', 'Not Converged'), ('failed', 'Failed')], default='pending', help_text='Current run status', max_length=20, verbose_name='Run Status')),
                ('exit_code', models.SmallIntegerField(blank=True, help_text='Process exit status reported to the shell', null=True, verbose_name='Exit Code')),
                ('summary', models.JSONField(blank=True, default=dict, help_text='Headline metrics or the failure message', verbose_name='Summary')),
                ('recorded_at', models.DateTimeField(auto_now_add=True, verbose_name='Recorded At')),
                ('started_at', models.DateTimeField(blank=True, null=True, verbose_name='Started At')),
                ('completed_at', models.DateTimeField(blank=True, null=True, verbose_name='Completed At')),
                ('forgotten_at', models.DateTimeField(blank=True, help_text='Set when the run was hidden with `runs --forget`', null=True, verbose_name='Forgotten At')),
            ],
            options={
                'verbose_name': 'Analysis Run',
                'verbose_name_plural': 'Analysis Runs',
                'db_table': 'analysis_runs',
                'ordering': ['-recorded_at', '-id'],
            },
        ),
    ]
