"""Shared fixtures-by-function for the test modules."""

import numpy as np

from lqgtune.config import load_config


def default_noise():
    cfg = load_config()
    return cfg.W, cfg.V


def default_config(**sections):
    return load_config(overrides=sections or None)
