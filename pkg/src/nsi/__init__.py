"""Network synthetic interventions: counterfactual estimation from panel data under network interference."""

from .bench import BenchConfig, BenchResult, baseline_estimate, run_bench, si_estimate
from .design import DesignSchedule, design_schedule, random_prediction_treatments, tailored_design
from .donors import DonorSet, donor_submatrices, find_donors, si_donors
from .errors import (
    CapabilityError,
    DegenerateRank,
    EmptyDonorSet,
    EstimationInfeasible,
    InputError,
    NSIError,
)
from .estimator import (
    EstimateReport,
    SpectralDecomposition,
    estimate,
    identification_oracle,
    select_kappa,
    svt_pinv,
)
from .graph import Coloring, NetworkGraph, greedy_color, make_regular_graph, neighbors, two_hop
from .panel import (
    LatentFactorWorld,
    ObservationPanel,
    SimConfig,
    TreatmentPanel,
    mean_outcome,
    simulate,
    true_estimand,
)
from .validity import colrank_diagnostic, subspace_inclusion_test, training_treatment_test

__version__ = "0.1.0"
