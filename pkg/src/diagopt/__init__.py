"""Assignment optimization on fixed decision-diagram skeletons.

The toolkit evaluates item/method assignments against a weighted examinee
population, encodes the three optimization settings as binary programs with
LP text export, and solves them natively by exact branch-and-bound verified
against an exhaustive oracle.
"""
from .candidates import (
    CandidateFamily,
    CategoryFamily,
    TypePartition,
    build_family,
    category_filter,
    neighborhood,
    partition_by_type,
    role_restrict,
)
from .core import (
    Arc,
    Assignment,
    Diagram,
    ExamineeType,
    InputError,
    ItemUniverse,
    Metrics,
    MethodUniverse,
    Population,
    evaluate,
    gamma,
    item_indicator,
    route,
    validate_diagram,
)
from .datagen import (
    Categorical,
    GenConfig,
    GenerationError,
    Predicate,
    ThresholdTable,
    TruncatedNormal,
    binarize,
    default_attribute_specs,
    default_item_universe,
    default_method_universe,
    default_threshold_table,
    generate_population,
    sample_raw,
    sample_response,
)
from .encoder import (
    BuildError,
    DecodeError,
    Instance,
    IPModel,
    VariablePoint,
    build_model,
    decode,
    encode_assignment,
    export_lp,
)
from .instances import InstanceTemplate, build_instance, instance_template
from .solver import (
    EnumerationCapError,
    SearchState,
    Solution,
    VerificationReport,
    bound,
    brute_force,
    solve,
    verify,
)

__version__ = "0.1.0"
