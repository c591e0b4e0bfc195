"""Headline values from the full-scale historical study.

They depend on the proprietary national flight-record corpus and are carried
for side-by-side display only; nothing in the pipeline is tuned to match them.
"""

STATED_ANALYSIS_DAYS = 4869
AIRPORT_GROUPS = 34
FEATURES = 136
PCA_SELECTED = 24
PCA_CUMULATIVE_EXPLAINED = 0.788
PC1_EXPLAINED = 0.300
PC3_EXPLAINED = 0.069
KMEANS_K = 12
IFOREST_TREES = 100
ANOMALY_MEDIAN = 0.09
ANOMALY_P95 = 0.37
ANOMALY_P99 = 0.63
MAX_ANOMALY_DAY = "2022-12-23"

# type, cluster, concentration, fraction %, avg anomaly, avg scheduled, avg CX %, avg ArrD/flight
TABLE_I = [
    ("Smooth", "Smooth1", 4.10, 34.42, 0.06, 17751, 1.35, 7.73),
    ("Smooth", "Smooth2", 5.85, 21.71, 0.07, 18382, 2.15, 12.65),
    ("Smooth", "Almost Smooth", 5.60, 9.87, 0.08, 18344, 1.91, 11.29),
    ("Smooth", "East Slight Disturbance", 6.37, 9.10, 0.12, 18686, 3.52, 14.60),
    ("Smooth", "NAS Slight Disturbance", 7.12, 9.29, 0.15, 18867, 3.07, 19.28),
    ("RegionalDisturbance", "DFW Disturbance", 9.54, 3.58, 0.21, 18852, 6.26, 20.70),
    ("RegionalDisturbance", "ORD Disturbance", 9.54, 3.43, 0.23, 18849, 7.52, 21.66),
    ("RegionalDisturbance", "West Disturbance", 11.78, 2.87, 0.24, 18297, 4.71, 18.43),
    ("RegionalDisruption", "Southeast Disruption", 10.94, 2.30, 0.30, 18675, 4.11, 23.95),
    ("RegionalDisruption", "Northeast Disruption", 9.15, 5.26, 0.35, 19447, 7.40, 25.17),
    ("NASDisruption", "East Super Disruption", 16.30, 1.19, 0.50, 19332, 25.29, 14.19),
    ("NASDisruption", "NAS Disruption", 21.76, 0.76, 0.75, 18287, 20.40, 41.74),
]

TABLE_I_COLUMNS = ["type", "cluster", "concentration", "fraction_days", "avg_anomaly",
                   "avg_sched_flights", "avg_cx_rate", "avg_arrd_per_flight"]


def as_json() -> dict:
    return {
        "note": "full-scale historical values; not reproducible from synthetic data",
        "stated_analysis_days": STATED_ANALYSIS_DAYS,
        "pca_selected": PCA_SELECTED,
        "pca_cumulative_explained": PCA_CUMULATIVE_EXPLAINED,
        "anomaly_percentiles": {"median": ANOMALY_MEDIAN, "p95": ANOMALY_P95, "p99": ANOMALY_P99},
        "max_anomaly_day": MAX_ANOMALY_DAY,
        "table_i": [dict(zip(TABLE_I_COLUMNS, row)) for row in TABLE_I],
    }
