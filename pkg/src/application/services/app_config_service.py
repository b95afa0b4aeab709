from pathlib import Path

from src.application.services.properties_parser import read_properties

class AppConfigService:
    """Service to load application metadata from the properties file"""

    def __init__(self, properties_file: Path | None = None):
        self._config: dict[str, str] = {}
        self._properties_file = properties_file or Path(__file__).parent.parent.parent.parent / "application.properties"
        self._load_properties()

    def _load_properties(self):
        """Load application.properties from the project root, if present"""
        if self._properties_file.exists():
            entries = read_properties(self._properties_file)
            self._config = {key: entry.value for key, entry in entries.items()}

    def get_version(self) -> str:
        """Get application version"""
        return self._config.get('APP_VERSION', 'unknown')

    def get_environment(self) -> str:
        """Get application environment (development/production)"""
        return self._config.get('APP_ENVIRONMENT', 'development')

    def is_production(self) -> bool:
        return self.get_environment().lower() == 'production'

    def is_debug(self) -> bool:
        """Debug builds check every recorded tensor for NaN/Inf"""
        return not self.is_production()

    def get_config(self, key: str, default: str | None = None) -> str | None:
        return self._config.get(key, default)

# Global instance
app_config = AppConfigService()
