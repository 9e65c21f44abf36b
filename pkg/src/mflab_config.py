"""
Centralized configuration management for mflab.
"""
import os
from typing import Dict, Any
from dataclasses import dataclass, fields
from .mflab_logging import get_logger

logger = get_logger("config")


@dataclass
class LabConfig:
    """Runtime settings shared by every lab module."""

    # Output configuration
    output_dir: str = "reports"

    # Execution configuration
    workers: int = 1
    block_size: int = 256

    # Quadrature configuration
    quadrature_cutoff: float = 40.0
    nodes_per_panel: int = 64
    min_panels: int = 16
    quadrature_rtol: float = 1e-10
    tail_mass_tol: float = 1e-12

    # Simulation configuration
    divergence_threshold: float = 1e8
    censoring_threshold: float = 0.05
    max_assignment_size: int = 512

    # Logging configuration
    log_level: str = "INFO"
    log_file: str = "logs/mflab.log"
    log_max_size: int = 10 * 1024 * 1024  # 10MB
    log_backup_count: int = 5


class ConfigManager:
    """Manages lab configuration from various sources."""

    def __init__(self):
        self._config = None

    def load_from_env(self) -> LabConfig:
        """
        Load configuration from environment variables.

        Returns:
            LabConfig instance
        """
        config = LabConfig()

        config.output_dir = os.environ.get('MFLAB_OUTPUT_DIR', config.output_dir)

        config.workers = int(os.environ.get('MFLAB_WORKERS', config.workers))
        config.block_size = int(os.environ.get('MFLAB_BLOCK_SIZE', config.block_size))

        config.quadrature_cutoff = float(os.environ.get('MFLAB_QUADRATURE_CUTOFF', config.quadrature_cutoff))
        config.nodes_per_panel = int(os.environ.get('MFLAB_NODES_PER_PANEL', config.nodes_per_panel))
        config.quadrature_rtol = float(os.environ.get('MFLAB_QUADRATURE_RTOL', config.quadrature_rtol))

        config.divergence_threshold = float(os.environ.get('MFLAB_DIVERGENCE_THRESHOLD', config.divergence_threshold))
        config.censoring_threshold = float(os.environ.get('MFLAB_CENSORING_THRESHOLD', config.censoring_threshold))
        config.max_assignment_size = int(os.environ.get('MFLAB_MAX_ASSIGNMENT_SIZE', config.max_assignment_size))

        config.log_level = os.environ.get('MFLAB_LOG_LEVEL', config.log_level)
        config.log_file = os.environ.get('MFLAB_LOG_FILE', config.log_file)
        config.log_max_size = int(os.environ.get('MFLAB_LOG_MAX_SIZE', config.log_max_size))
        config.log_backup_count = int(os.environ.get('MFLAB_LOG_BACKUP_COUNT', config.log_backup_count))

        self._config = config
        return config

    def load_from_dict(self, config_dict: Dict[str, Any]) -> LabConfig:
        """
        Load configuration from dictionary.

        Args:
            config_dict: Dictionary containing configuration values

        Returns:
            LabConfig instance
        """
        config = LabConfig()
        known = {f.name for f in fields(LabConfig)}

        for key, value in config_dict.items():
            if key in known:
                setattr(config, key, value)
            else:
                logger.warning(f"Ignoring unknown configuration key: {key}")

        self._config = config
        return config

    def get_config(self) -> LabConfig:
        """
        Get the current configuration.

        Returns:
            Current LabConfig instance

        Raises:
            RuntimeError: If no configuration has been loaded
        """
        if self._config is None:
            raise RuntimeError("Configuration not loaded. Call load_from_env() or load_from_dict() first.")
        return self._config

    def reset(self) -> None:
        """Forget the loaded configuration."""
        self._config = None

    def validate_config(self) -> bool:
        """
        Validate the current configuration.

        Returns:
            True if configuration is valid

        Raises:
            ValueError: If configuration is invalid
        """
        if self._config is None:
            raise ValueError("No configuration loaded")

        config = self._config

        if not config.output_dir or not isinstance(config.output_dir, str):
            raise ValueError("Invalid output directory")

        if config.workers < 1:
            raise ValueError("workers must be at least 1")
        if config.block_size < 1:
            raise ValueError("block_size must be positive")

        if config.quadrature_cutoff <= 0:
            raise ValueError("quadrature_cutoff must be positive")
        if config.nodes_per_panel < 2:
            raise ValueError("nodes_per_panel must be at least 2")
        if config.min_panels < 1:
            raise ValueError("min_panels must be positive")
        if not (0 < config.quadrature_rtol < 1):
            raise ValueError("quadrature_rtol must lie in (0, 1)")

        if config.divergence_threshold <= 0:
            raise ValueError("divergence_threshold must be positive")
        if not (0 <= config.censoring_threshold < 1):
            raise ValueError("censoring_threshold must lie in [0, 1)")
        if config.max_assignment_size < 1:
            raise ValueError("max_assignment_size must be positive")

        if config.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"Unknown log level: {config.log_level}")

        logger.info("Configuration validation successful")
        return True


# Global configuration manager instance
config_manager = ConfigManager()


def get_lab_config() -> LabConfig:
    """
    Get the lab configuration, falling back to defaults when nothing was loaded.

    Returns:
        Current lab configuration
    """
    try:
        return config_manager.get_config()
    except RuntimeError:
        return config_manager.load_from_dict({})


def init_lab_config() -> LabConfig:
    """
    Initialize lab configuration from environment variables.

    Returns:
        Loaded configuration
    """
    config = config_manager.load_from_env()
    config_manager.validate_config()
    return config
