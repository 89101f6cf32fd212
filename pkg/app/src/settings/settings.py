"""
The module holds the constants of the experimental setup and the protocol defaults.

The module contains the following groups of variables:

    area_width, area_height: Size of the simulated field in meters (500 x 500 m).
    duration_s: Length of every experiment in seconds.
    node_counts, pause_values, speed_values: The value sets of the scenario matrix.
    pause_sweep_speed: Maximum speed of the pause-varying scenarios.
    speed_sweep_pause: Pause time of the speed-varying scenarios.
    speed_min: Minimum node speed of every scenario.
    cbr_*: Constant bit rate traffic parameters.
    connections: Number of CBR connections per node count.

Radio, buffer and protocol defaults are the NS2-era conventions the
experiments were run with; every one of them can be overridden with an
overrides file (see `app.src.settings.config`).
"""

# Experimental setup
area_width = 500.0
area_height = 500.0
duration_s = 150.0

node_counts = (10, 20, 30, 40, 50)
pause_values = (10.0, 50.0, 100.0, 150.0, 200.0)
speed_values = (5.0, 10.0, 15.0, 20.0, 25.0)
pause_sweep_speed = 2.0
speed_sweep_pause = 2.0
speed_min = 1.0
default_seeds = 5

cbr_rate = 4.0
cbr_payload = 512
cbr_start_window_s = 50.0
connections = {10: 20, 20: 20, 30: 20, 40: 40, 50: 40}

protocols = ('dsdv', 'aodv', 'dsr', 'zrp')

# Radio and MAC
radio_range_m = 250.0
data_rate_bps = 2_000_000
frame_overhead = 58
ifq_capacity = 50
retry_limit = 7
backoff_min_us = 100
backoff_max_us = 2000
backoff_doublings = 5
neighbor_refresh_s = 0.1

# Routing layer
send_buffer_capacity = 64
send_buffer_timeout_s = 30.0
data_ttl = 32

dsdv_update_interval_s = 15.0
dsdv_full_dump_every = 3
dsdv_trigger_spacing_s = 1.0
dsdv_missed_updates = 3

aodv_hello_interval_s = 1.0
aodv_allowed_hello_loss = 2
aodv_active_route_timeout_s = 10.0
aodv_node_traversal_time_s = 0.04
aodv_rreq_retries = 2
aodv_net_diameter = 35
aodv_ttl_start = 1
aodv_ttl_increment = 2
aodv_ttl_threshold = 7

dsr_cache_capacity = 64
dsr_cache_expiry_s = 300.0
dsr_max_route_length = 16
dsr_request_period_s = 0.5
dsr_max_request_period_s = 10.0
dsr_header_per_hop = 4

zrp_radius = 2
zrp_beacon_interval_s = 1.0
zrp_beacon_loss = 3
zrp_iarp_refresh_s = 5.0
zrp_iarp_min_interval_s = 1.0
zrp_query_timeout_s = 1.0
zrp_query_retries = 3

# Routing packet sizes in bytes
packet_sizes = {
    'dsdv': 20,
    'dsdv_entry': 12,
    'aodv:rreq': 48,
    'aodv:rrep': 44,
    'aodv:rerr': 12,
    'aodv:rerr_entry': 8,
    'aodv:hello': 44,
    'dsr:rreq': 32,
    'dsr:rrep': 32,
    'dsr:rerr': 40,
    'zrp:beacon': 24,
    'zrp:iarp': 28,
    'zrp:ierp_q': 36,
    'zrp:ierp_r': 36,
    'zrp:ierp_e': 40,
    'hop': 4,
}

# Output files
movement_file = 'movement.txt'
traffic_file = 'traffic.txt'
scenario_meta_file = 'scenario.json'
metrics_header = ('protocol', 'nodes', 'pause', 'speed', 'seed', 'throughput', 'avg_delay_s',
                  'dropped', 'overhead', 'generated', 'delivered')
