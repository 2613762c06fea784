from .oracle import EnumerationTooLarge, OracleInconsistency, OracleReport, enumerate_optimal
from .comparison import CSV_HEADER, ComparisonRow, ComparisonTable, reference_cost, run_comparison
from .runlog import RunLogError, DigestMismatch, RunLogFile
from .runlog import online_run_file, classical_run_file, vi_run_file, online_log_from_file, check_digest, replay, verify_file
