import logging
import colorlog

class CustomFormatter(colorlog.ColoredFormatter):
    def format(self, record):
        # Map logger names to shorter display names
        name_mappings = {
            'training.finite': 'train',
            'training.episodic': 'episodic',
            'training.reinit': 'reinit',
            'model.kmeans': 'kmeans',
            'model.network': 'model',
            'model.nystrom': 'nystrom',
            'supervised.task_head': 'task',
            'experiment_pipeline': 'pipeline',
            'experiment_config_service': 'config',
            'run_experiment_command': 'run',
            'evaluate_checkpoint_query': 'eval',
            'export_heatmaps_command': 'export',
            'infrastructure.artifacts': 'artifacts',
            'sentry_sdk.errors': 'sentry',
        }

        original_name = record.name
        record.name = name_mappings.get(record.name, record.name)

        formatted = super().format(record)

        record.name = original_name

        return formatted

def setup_colored_logging(level: int | str = logging.INFO):
    handler = colorlog.StreamHandler()
    formatter = CustomFormatter(
        '%(log_color)s%(levelname)s%(reset)s:%(white)s %(asctime)s - [%(name)s] %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
        log_colors={
            'DEBUG':    'cyan',
            'INFO':     'green',
            'WARNING':  'yellow',
            'ERROR':    'red',
            'CRITICAL': 'bold_red',
        }
    )
    handler.setFormatter(formatter)

    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO

    root_logger = logging.getLogger()
    root_logger.handlers = []
    root_logger.addHandler(handler)
    root_logger.setLevel(level)

    # matplotlib and PIL are chatty at DEBUG
    for noisy in ("matplotlib", "PIL"):
        logging.getLogger(noisy).setLevel(logging.WARNING)

    return root_logger

def get_logger(name: str = None):
    """Get a logger instance."""
    if name is None:
        name = "unknown"
    return logging.getLogger(name)
