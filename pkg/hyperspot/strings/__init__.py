"""User-facing text of the command line, the error messages and the plots."""
import os
from functools import lru_cache
from typing import Any, Dict

import yaml

DEFAULT_LANGUAGE = "en_US"


@lru_cache(maxsize=None)
def translation(lang: str = DEFAULT_LANGUAGE) -> Dict[Any, Any]:
    """Retrieve the messages in the provided language.

    Unknown languages fall back to the default language.
    """
    path = os.path.join(os.path.dirname(__file__), f"{lang}.yaml")
    if not os.path.exists(path):
        path = os.path.join(os.path.dirname(__file__), f"{DEFAULT_LANGUAGE}.yaml")
    with open(path, "r", encoding="utf-8") as file:
        return yaml.safe_load(file)
