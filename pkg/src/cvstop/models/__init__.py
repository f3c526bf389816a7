"""Catalog models, belief updates and closed-form reservation values."""
from .beliefs import (belief_update_two_density, crra, crra_inverse, posterior_update_normal,
                      posterior_update_signal)
from .catalog import (CATALOG, BuiltModel, CatalogEntry, GridAxis, build_model, bull_jovanovic,
                      constant_model, entry_probability, expected_entry_utility, merged_params,
                      reservation_closed_form)

__all__ = [
    "CATALOG", "BuiltModel", "CatalogEntry", "GridAxis", "build_model", "bull_jovanovic",
    "constant_model", "entry_probability", "expected_entry_utility", "merged_params",
    "reservation_closed_form", "belief_update_two_density", "crra", "crra_inverse",
    "posterior_update_normal", "posterior_update_signal",
]
