"""Rotating and self-similarly imploding hollow vortices.

Modules:

- ``fourier``: exact Laurent-coefficient algebra for traces on the circle.
- ``layer_potential``: exterior layer potentials on unions of disks.
- ``single_vortex``: m-fold rotating vortices, dispersion, branches, rigidity.
- ``point_vortex``: collapsing point-vortex configurations.
- ``desingularization``: hollow-vortex configurations near point-vortex roots.
- ``fields_io``: physical fields, audits, lab frame and file output.
- ``cli``: the ``hollow-vortex`` command.
"""

__version__ = "0.1.0"
