#
# ONLINEPI: On-line policy iteration for finite-state discounted dynamic programming
#
import logging
from datetime import datetime

__NAME__ = "onlinepi"
__COPYRIGHT__ = f"© 2022-{datetime.now().strftime('%Y')} Pierre M <pierre@devleaks.be>"

__version__ = "0.9.0"

# Per-step traces of on-line runs, below DEBUG
SPAM_LEVEL = 5
logging.addLevelName(SPAM_LEVEL, "SPAM")

# Numerics too delicate to be scattered in modules
# !! adjust with care !!
PROBABILITY_TOLERANCE = 1e-9  # absolute, rows are never renormalized
OPTIMALITY_TOLERANCE = 1e-8  # all optimality checks
ORACLE_TOLERANCE = 1e-7  # optimal-set membership in brute-force enumeration
EPSILON_IMPROVE = 1e-9  # strictness margin for on-line improvement
INCUMBENT_SLACK = 1e-12  # classical PI keeps current control when within this of the minimum
MONOTONE_SLACK = 1e-8  # J snapshots may increase by at most this much
STABLE_WINDOW_FACTOR = 10  # default stable window is this times n
ENUMERATION_LIMIT = 10**6  # maximum number of policies the oracle accepts

# Output
SIGNIFICANT_DIGITS = 9
