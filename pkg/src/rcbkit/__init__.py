from . import _settings

__version__ = "0.1.0"

# Expose settings functions
get_setting = _settings.get_setting
update_settings = _settings.update_settings
