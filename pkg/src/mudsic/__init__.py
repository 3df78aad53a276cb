"""Uplink multi-cell MUD-SIC goodput simulator and closed-form outage analysis.

The package is organized around the pipeline of a centralized uplink
controller:

    channel     -- geometry, path loss + shadowing, Rayleigh fading
    controller  -- association, macro-diversity sets, on/off power, decode order
    sic         -- per-realization SIC decoding with error propagation
    analysis    -- closed-form outage bounds, order probabilities, rate solver
    baselines   -- CDMA equal-received-power, FDMA, joint-ML common outage
    montecarlo  -- seeded experiment sweeps and analysis-vs-simulation checks
    cli         -- `mudsic` command line front end

All powers are handled internally in linear mW with channel gains
pre-divided by the linear noise power, so a received SNR is simply
``P * g * |H|**2``.  dBm / dB only appear at the I/O boundary.
"""

from .channel import (
    ChannelParams,
    FadingDraw,
    NetworkScene,
    draw_fading,
    draw_macro,
    path_loss_db,
    place_users,
)
from .controller import (
    DecodingOrder,
    Plan,
    associate_users,
    build_plan,
    decoding_order,
    mdiv_assign,
    onoff_power,
)
from .sic import (
    FULL_PROPAGATION,
    TRUNCATE_ON_FAILURE,
    RealizationResult,
    SicTrace,
    decode_realization,
    instantaneous_goodput,
    mdiv_combine,
    receive_snr,
    sic_decode,
)
from .analysis import (
    EnumerationPolicy,
    OutageReport,
    SpacingModel,
    conditional_outage,
    exp_combination_cdf,
    goodput_lower_bound,
    order_probability,
    outage_report,
    per_user_outage_bound,
    solve_all_rates,
    solve_rate,
    spacing_betas,
)
from .montecarlo import ExperimentSpec, MetricTable, run_experiment, validate_analysis

__version__ = "0.1.0"
