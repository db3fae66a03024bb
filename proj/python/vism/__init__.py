"""Variational implicit-solvent free energies on a grid."""

from ._vism import (
    Atom,
    Molecule,
    VismError,
    born,
    born_energy_analytical,
    effective_config,
    nnls,
    parse_molecule,
    read_molecule,
    set_threads,
    solve,
    spread_charges,
)

__all__ = [
    "Atom",
    "Molecule",
    "VismError",
    "born",
    "born_energy_analytical",
    "effective_config",
    "nnls",
    "parse_molecule",
    "read_molecule",
    "set_threads",
    "solve",
    "spread_charges",
]
