"""Pydantic Models for lowrank_syk Configuration Files."""

from .config_model import LowRankSykConfig, resolve_charge

__all__ = ["LowRankSykConfig", "resolve_charge"]
