"""Numerical and exact verification of multiplicative gerbe data on SU(2).

Modules:
    groups: matrix groups, exponential, Maurer-Cartan forms.
    forms: invariant pairing and differential forms on products of the group.
    mesh: simplicial meshes, quadrature and integration of pulled-back forms.
    wzw: surface holonomy, Polyakov-Wiegmann check, loop-group central extension.
    cellmodel: finite cell model of the simplicial circle group with a cover.
    deligne: exact simplicial Deligne complex on a cell model.
    chern_simons: Chern-Simons actions, gauge shifts and transition identities.
    branes: conjugacy-class D-brane 2-forms and bi-brane curvature.
    suites, cli: verification suites and the command-line driver.
"""

__version__ = "0.1.0"
