"""Figure rendering for mcvd experiment output directories.

Consumes only the published file interface of the simulator CLI: the
``summary.json`` plus the per-grid-point pattern tables
(``angle_deg,counts_at_ts,gain,peak_time_s``).
"""

__version__ = "0.1.0"

FIGURE_KINDS = ("polar_pattern", "peak_time", "hppw", "gain")
