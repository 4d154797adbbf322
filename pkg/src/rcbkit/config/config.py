from pathlib import Path

import hydra
from hydra.core.global_hydra import GlobalHydra
from omegaconf import OmegaConf

from .schema import RuntimeConfig


def read_override_file(path) -> list[str]:
    """
    Read a ``key=value`` configuration file into hydra override strings.

    Blank lines and ``#`` comments are skipped.

    Parameters
    ----------
    path : str or Path
        The configuration file.

    Returns
    -------
    list[str]
        One override per non-empty line, e.g. ``"device.cols=8"``.
    """
    overrides = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        overrides.append(f"{key}={value}")
    return overrides


def load_config(
    config_name="default", overrides=None, config_path="./"
) -> RuntimeConfig:
    """
    Load a configuration file using Hydra and validate it against the schema.

    Parameters
    ----------
    config_name : str
        The name of the configuration file to load.
    overrides : list[str], optional
        Hydra overrides (``key=value``) applied in order.
    config_path : str, optional
        The path to the configuration file relative to where config.py is located.

    Note
    -----
    Hydra only supports relative paths to the parent of the caller, that is, this config.py file.

    Returns
    -------
    RuntimeConfig
        The typed configuration tree.
    """
    GlobalHydra.instance().clear()
    with hydra.initialize(config_path=config_path, version_base="1.3"):
        cfg = hydra.compose(config_name=config_name, overrides=list(overrides or []))
    merged = OmegaConf.merge(OmegaConf.structured(RuntimeConfig), cfg)
    return OmegaConf.to_object(merged)


def pretty_print_config(cfg):
    """
    Pretty print the configuration tree.
    """
    print(OmegaConf.to_yaml(OmegaConf.structured(cfg)))
