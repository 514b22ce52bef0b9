"""Built-in scenario catalog.

Each entry is a config text in the documented grammar, so running the
catalog exercises the same parsing and validation path as user files.
Entries are grouped by what they probe; `sphere2_volume_strong` is a
deliberate hypothesis violation (drift past the smallness gate) kept to
demonstrate that exclusion is not failure.
"""

from __future__ import annotations

from typing import Dict

from .config import ScenarioConfig, parse_scenario

CATALOG_TEXTS: Dict[str, str] = {}


def _add(name: str, text: str):
    CATALOG_TEXTS[name] = text.strip() + "\n"


_add("flat3_identity", """
name = flat3_identity
seed = 0

[manifold]
kind = space_form
n = 3
H = 0.0
half_width = 3.0

[tensor]
kind = identity

[scenario]
working_radius = 2.0

[check identities]
n_sites = 100

[check riccati]
r_list = 0.5 1.0 1.5
""")

_add("sphere2_hessian", """
name = sphere2_hessian
seed = 0

[manifold]
kind = space_form
n = 2
H = 1.0

[tensor]
kind = codazzi_hessian
phi = second_harmonic
c = 0.02

[scenario]
working_radius = 1.5

[check identities]
n_sites = 60

[check riccati]
r_list = 0.4 0.8 1.2

[check mean_curvature]
quarter_window = true
r_list = 0.4 0.7 1.0
""")

_add("hyp2_hessian", """
name = hyp2_hessian
seed = 0

[manifold]
kind = space_form
n = 2
H = -1.0
half_width = 1.3

[tensor]
kind = codazzi_hessian
phi = radial_cosh2
c = 0.05

[scenario]
working_radius = 1.1

[check identities]
n_sites = 60

[check mean_curvature]
r_list = 0.3 0.6 0.9
""")

_add("s3_polar", """
name = s3_polar
seed = 0

[manifold]
kind = space_form
n = 3
H = 1.0
chart = polar

[tensor]
kind = identity

[scenario]
base_point = 0.03 1.2 1.5
working_radius = 0.9

[check riccati]
r_list = 0.35 0.55 0.75

[check mean_curvature]
r_list = 0.35 0.55 0.75
""")

_add("h3_polar", """
name = h3_polar
seed = 0

[manifold]
kind = space_form
n = 3
H = -1.0
chart = polar

[tensor]
kind = identity

[scenario]
base_point = 0.03 1.2 1.5
working_radius = 1.2

[check riccati]
r_list = 0.4 0.7 1.0

[check mean_curvature]
r_list = 0.4 0.7 1.0
""")

_add("sphere2_meyer", """
name = sphere2_meyer
seed = 0

[manifold]
kind = space_form
n = 2
H = 1.0

[tensor]
kind = codazzi_hessian
phi = second_harmonic
c = 0.02

[scenario]
working_radius = 1.5
declared_diameter = 3.121592653589793

[check meyer]
pair_radius = 2.0
n_pairs = 4
""")

_add("flat3_volume", """
name = flat3_volume
seed = 0

[manifold]
kind = space_form
n = 3
H = 0.0
half_width = 3.0

[tensor]
kind = identity

[scenario]
working_radius = 2.0

[check volume_monotonicity]
n_dir = 48
n_r = 120

[check weighted_ratio]
n_dir = 48
n_r = 120
""")

_add("sphere2_volume", """
name = sphere2_volume
seed = 0

[manifold]
kind = space_form
n = 2
H = 1.0

[tensor]
kind = codazzi_hessian
phi = second_harmonic
c = 0.02

[scenario]
working_radius = 1.5
measure_radius = 0.66

[check volume_monotonicity]
n_dir = 64
n_r = 120

[check weighted_ratio]
n_dir = 64
n_r = 120
""")

_add("sphere2_volume_strong", """
name = sphere2_volume_strong
seed = 0

[manifold]
kind = space_form
n = 2
H = 1.0

[tensor]
kind = codazzi_hessian
phi = second_harmonic
c = 0.05

[scenario]
working_radius = 1.5

[check weighted_ratio]
n_dir = 64
n_r = 120
""")

_add("cylinder_yau", """
name = cylinder_yau
seed = 0

[manifold]
kind = product_cylinder
rho = 1.0
half_length = 110.0
theta_half = 3.3

[tensor]
kind = constant_diag
values = 2.0 1.0

[scenario]
working_radius = 3.0
dist_n_dir = 12
dist_top_k = 2

[check yau_growth]
radii = 1.0 1.5 2.0 2.5 3.0
floor = 3.0
cylinder = 2.0 1.0 1.0
n_dir = 64
n_r = 150
""")

_add("cylinder_splitting", """
name = cylinder_splitting
seed = 0

[manifold]
kind = product_cylinder
rho = 1.0
half_length = 110.0
theta_half = 3.3

[tensor]
kind = constant_diag
values = 2.0 1.0

[scenario]
working_radius = 80.0
line_point = 0.0 0.0
line_direction = 1.0 0.0
dist_n_dir = 12
dist_top_k = 2
dist_h_override = 0.5

[check splitting]
T = 40.0
""")

_add("flat2_splitting", """
name = flat2_splitting
seed = 0

[manifold]
kind = space_form
n = 2
H = 0.0
half_width = 110.0

[tensor]
kind = identity

[scenario]
working_radius = 80.0
line_point = 0.0 0.0
line_direction = 1.0 0.0
dist_n_dir = 12
dist_top_k = 2
dist_h_override = 0.5

[check splitting]
T = 40.0
""")

_add("flat2_qmp", """
name = flat2_qmp
seed = 0

[manifold]
kind = space_form
n = 2
H = 0.0
half_width = 4.0

[tensor]
kind = identity

[scenario]
working_radius = 2.0
dist_n_dir = 12
dist_top_k = 2

[check qmp]
p = -1.0 0.0
q = 1.0 0.0
y = 0.0 0.5
R = 0.8
n_sites = 6
""")

_add("hyp2_qmp", """
name = hyp2_qmp
seed = 0

[manifold]
kind = space_form
n = 2
H = -1.0
half_width = 1.3

[tensor]
kind = identity

[scenario]
working_radius = 1.0
dist_n_dir = 12
dist_top_k = 2

[check qmp]
p = -0.3 0.0
q = 0.3 0.0
y = 0.0 0.15
R = 0.25
n_sites = 6
""")

_add("flat3_excess", """
name = flat3_excess
seed = 0

[manifold]
kind = space_form
n = 3
H = 0.0
half_width = 3.0

[tensor]
kind = identity

[scenario]
working_radius = 2.0
dist_n_dir = 10
dist_top_k = 2

[check excess]
p = -1.0 0.0 0.0
q = 1.0 0.0 0.0
n_points = 60
""")

_add("cylinder_ends", """
name = cylinder_ends
seed = 0

[manifold]
kind = product_cylinder
rho = 1.0
half_length = 110.0
theta_half = 3.3

[tensor]
kind = constant_diag
values = 2.0 1.0

[scenario]
working_radius = 75.0
declared_ends = 2

[check ends]
R = 6.0
H = 0.027777777777777776
""")

_add("oblate_identity", """
name = oblate_identity
seed = 0

[manifold]
kind = rotation_surface
profile = oblate
a = 1.0
c = 0.8

[tensor]
kind = identity

[scenario]
base_point = 1.57 0.0
working_radius = 1.0

[check identities]
n_sites = 40
""")

_add("warp_identity", """
name = warp_identity
seed = 0

[manifold]
kind = warped_product
warp = cosh
half_length = 2.0
theta_half = 3.0

[tensor]
kind = identity

[scenario]
working_radius = 1.5

[check identities]
n_sites = 40
""")

_add("hypersurface_sphere", """
name = hypersurface_sphere
seed = 0

[manifold]
kind = hypersurface
immersion = sphere
radius = 1.0

[tensor]
kind = shape_operator

[check hypersurface]
n_samples = 200
""")

_add("hypersurface_catenoid", """
name = hypersurface_catenoid
seed = 0

[manifold]
kind = hypersurface
immersion = catenoid
waist = 1.0

[tensor]
kind = shape_operator

[check hypersurface]
n_samples = 200
""")

_add("hypersurface_plane", """
name = hypersurface_plane
seed = 0

[manifold]
kind = hypersurface
immersion = plane

[tensor]
kind = shape_operator

[check hypersurface]
n_samples = 50
""")


def catalog_names():
    return sorted(CATALOG_TEXTS)


def catalog_config(name: str) -> ScenarioConfig:
    if name not in CATALOG_TEXTS:
        known = ", ".join(catalog_names())
        raise KeyError(f"unknown catalog scenario {name!r} (known: {known})")
    return parse_scenario(CATALOG_TEXTS[name])
