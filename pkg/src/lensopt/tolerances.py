"""Pinned numerical tolerances used by the verification suite.

Every acceptance check reads its threshold from here, and run manifests
record the whole table, so a result can always be traced to the exact
tolerances in force.
"""

TOLERANCES = {
    "zero_data_max": 1e-14,              # machine-exactness of zero-data runs
    "mms_min_order": 1.8,                # temporal and spatial convergence orders
    "picard_small_pulse_tol": 1e-10,     # relative update reached by the pulse run
    "picard_small_pulse_sweeps": 15,     # sweep budget for the pulse run
    "gradient_threeway_rel": 5e-2,       # pairwise route agreement, coarse level
    "gradient_refinement_factor": 1.5,   # minimum gap shrink under (h, tau) halving
    "gl_ramp_energy_abs": 1e-3,          # |E(ramp) - 7/12|
    "gl_fd_rel": 1e-6,                   # GL gradient vs central differences
    "profile_constant_rel": 2e-2,        # 1D profile energy vs pi/8
    "perimeter_square_rel": 2e-2,        # axis-aligned square at 256^2
    "perimeter_disk_rel": 5e-2,          # disk at 256^2
    "stability_ratio_factor": 2.0,       # spread of difference quotients over s
    "recovery_tracking_reduction": 0.5,  # misfit drop in the recovery run
    "recovery_stationarity_drop": 10.0,  # stationarity drop in the recovery run
}
