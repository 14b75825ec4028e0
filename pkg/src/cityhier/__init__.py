"""Cities from gridded population data, road-distance Voronoi hierarchies,
and Monte Carlo tests of the spacing-out and common-power-law properties."""

__version__ = "0.1.0"

from . import errors
from .cities import (
    City,
    CitySet,
    cell_area_km2,
    extract_cities,
    load_cities_csv,
    save_cities_csv,
)
from .geo import (
    DistanceMatrix,
    build_distance_matrix,
    great_circle_m,
    shortest_path_from,
    snap_cities,
)
from .ingest import (
    PopulationGrid,
    RoadNetwork,
    load_distance_matrix,
    load_population_grid,
    load_road_network,
    save_distance_matrix,
    save_population_grid,
    save_road_network,
)
from .mctests import (
    CplTestResult,
    SpacingTestResult,
    significance_class,
    spacing_grid,
    spacing_out_test,
    spatial_cpl_test,
    theta_profile,
)
from .partition import (
    CellNode,
    HierarchicalPartition,
    Hinterland,
    HinterlandSet,
    Partition,
    build_random_hierarchy,
    build_spatial_hierarchy,
    global_hinterlands,
    load_hierarchy_json,
    random_centers,
    random_partition_with_sizes,
    save_hierarchy_json,
    voronoi_partition,
)
from .seeding import substream
from .stats import CplFit, GiFit, RankSizeSample, fit_cpl, fit_gi, rank_sizes
from .synth import SynthSpec, gen_hierarchical_system, gen_iid_system, relocate_sizes

__all__ = [
    "__version__",
    "errors",
    "City",
    "CitySet",
    "cell_area_km2",
    "extract_cities",
    "load_cities_csv",
    "save_cities_csv",
    "DistanceMatrix",
    "build_distance_matrix",
    "great_circle_m",
    "shortest_path_from",
    "snap_cities",
    "PopulationGrid",
    "RoadNetwork",
    "load_distance_matrix",
    "load_population_grid",
    "load_road_network",
    "save_distance_matrix",
    "save_population_grid",
    "save_road_network",
    "CplTestResult",
    "SpacingTestResult",
    "significance_class",
    "spacing_grid",
    "spacing_out_test",
    "spatial_cpl_test",
    "theta_profile",
    "CellNode",
    "HierarchicalPartition",
    "Hinterland",
    "HinterlandSet",
    "Partition",
    "build_random_hierarchy",
    "build_spatial_hierarchy",
    "global_hinterlands",
    "load_hierarchy_json",
    "random_centers",
    "random_partition_with_sizes",
    "save_hierarchy_json",
    "voronoi_partition",
    "substream",
    "CplFit",
    "GiFit",
    "RankSizeSample",
    "fit_cpl",
    "fit_gi",
    "rank_sizes",
    "SynthSpec",
    "gen_hierarchical_system",
    "gen_iid_system",
    "relocate_sizes",
]
