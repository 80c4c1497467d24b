"""Simulation of a channel-reciprocity attack by a non-diagonal RIS in TDD multi-user MISO."""
from .scenario import Scenario, build_scenario, reference_preset
from .ndris import NdRis, make_ndris, random_ndris, quantize, is_reciprocal
from .channel import sample_channels, effective_uplink, effective_downlink_actual
from .precoding import mrt, zf, SingularChannelError
from .rate import monte_carlo_rates, baseline_rates
from .closedform import closed_form_rates, asymptotic_large_m, asymptotic_large_p

__version__ = "0.1.0"
