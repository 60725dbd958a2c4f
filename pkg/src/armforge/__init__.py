"""Design-space optimization for serial modular robot arms.

The package searches over joint orientations, link lengths and connection
patterns for arms that reach a user-given set of workspace targets with
minimal tip error and minimal static gravity torque, and exports the
winning designs as URDF.
"""

from .campaign import (
    CampaignConfig,
    ConfigError,
    genotype_from_dict,
    genotype_to_dict,
    run_optimize,
    run_sweep,
)
from .design import (
    GENERAL,
    MODULE,
    Genotype,
    JointGene,
    KinematicModel,
    MalformedGenotypeError,
    ModuleGene,
    SearchSpace,
    ValidationReport,
    Violation,
    decode,
    enumerate_orientations,
    load_module_table,
    sample_genotype,
    validate_genotype,
)
from .evaluation import (
    ObjectiveVector,
    TargetParseError,
    TargetSet,
    evaluate,
    load_targets,
    penalize,
)
from .kinematics import (
    IkOptions,
    IkResult,
    Pose,
    forward_kinematics,
    gravity_torque,
    jacobian,
    solve_ik,
)
from .optimizer import (
    ParetoArchive,
    SamplerState,
    Trial,
    ask,
    crowding_distance,
    dominates,
    freeze_reference,
    hypervolume,
    make_sampler,
    nondominated_sort,
    pareto_front,
    tell,
)
from .reporting import IncompleteCampaignError, render_report
from .urdf import UrdfError, export_urdf, load_urdf

__version__ = "0.1.0"

__all__ = [
    "CampaignConfig",
    "ConfigError",
    "GENERAL",
    "Genotype",
    "IkOptions",
    "IkResult",
    "IncompleteCampaignError",
    "JointGene",
    "KinematicModel",
    "MODULE",
    "MalformedGenotypeError",
    "ModuleGene",
    "ObjectiveVector",
    "ParetoArchive",
    "Pose",
    "SamplerState",
    "SearchSpace",
    "TargetParseError",
    "TargetSet",
    "Trial",
    "UrdfError",
    "ValidationReport",
    "Violation",
    "ask",
    "crowding_distance",
    "decode",
    "dominates",
    "enumerate_orientations",
    "evaluate",
    "export_urdf",
    "forward_kinematics",
    "freeze_reference",
    "genotype_from_dict",
    "genotype_to_dict",
    "gravity_torque",
    "hypervolume",
    "jacobian",
    "load_module_table",
    "load_targets",
    "load_urdf",
    "make_sampler",
    "nondominated_sort",
    "pareto_front",
    "penalize",
    "render_report",
    "run_optimize",
    "run_sweep",
    "sample_genotype",
    "solve_ik",
    "tell",
    "validate_genotype",
    "__version__",
]
