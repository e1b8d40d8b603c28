"""Generalized fractal dimensions, correlation sums and recurrence rates
for invariant measures of the bilateral full shift."""

from .estimators import (
    EstimateReport,
    SlopeSeries,
    correlation_dimension_proxy,
    correlation_sum,
    correlation_sum_report,
    covering_sum_greedy,
    energy_mc,
    gfd_proxy,
    markov_energy_closed_form,
    mollified_ball_mass,
    mollified_covering_sum,
    mollified_energy,
    mollifier_kernel,
    renyi_profile,
    windowed_energy_exact,
)
from .measures import (
    BudgetExceeded,
    CylinderWord,
    MarkovMeasure,
    PeriodicOrbitMeasure,
    build_markov,
    cylinder_mass,
    enumerate_cylinders,
    min_separation,
    sample_orbit,
)
from .recurrence import ReturnRecord, recurrence_rates, return_time
from .shift_space import (
    Alphabet,
    ScaleGrid,
    SeqWindow,
    SequenceMetric,
    distance,
    in_cylinder_ball,
    inner_window,
    window_cutoff,
)

__version__ = "0.1.0"
