from django.apps import AppConfig
"""
    Django application configuration for pdsketch_app.

    Responsibility:
    - Registers the app with Django under the label 'pdsketch_app'.
    - Makes the management commands (validate_domain, gen_data, train,
      compile, plan, bench, plot_bench) discoverable.

    Notes:
    - `default_auto_field` is set to BigAutoField for the run_manifest and
      bench_result models.
    """

class PdsketchAppConfig(AppConfig):

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'pdsketch_app'
    verbose_name = 'PDSketch toolkit'
