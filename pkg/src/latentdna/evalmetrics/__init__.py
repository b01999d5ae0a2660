"""Sample-quality metrics: FReD, motif positional histograms, profile hits."""
from .fred import FredResult, embed, fred
from .gaussian import GaussianSummary, NotPSDError, fit_gaussian, frechet_distance, matrix_sqrt_psd
from .matrixio import MatrixFormatError, dumps_matrix, load_matrix, loads_matrix, read_csv, save_matrix, write_csv
from .motifs import TATA_BOX, MotifHistogram, histogram_distance, motif_histogram, motif_scan, moving_average
from .plots import (
    histogram_svg,
    line_plot_svg,
    read_histogram_csv,
    read_series_csv,
    write_histogram_csv,
    write_series_csv,
)
from .sei import HIT_THRESHOLD, PredictionRangeError, ProfileHitReport, read_labels, sei_embedding_distance, sei_hits

__all__ = [
    "FredResult", "GaussianSummary", "HIT_THRESHOLD", "MatrixFormatError", "MotifHistogram", "NotPSDError",
    "PredictionRangeError", "ProfileHitReport", "TATA_BOX", "dumps_matrix", "embed", "fit_gaussian", "fred",
    "frechet_distance", "histogram_distance", "histogram_svg", "line_plot_svg", "load_matrix", "loads_matrix",
    "matrix_sqrt_psd", "motif_histogram", "motif_scan", "moving_average", "read_csv", "read_histogram_csv",
    "read_labels", "read_series_csv", "save_matrix", "sei_embedding_distance", "sei_hits", "write_csv",
    "write_histogram_csv", "write_series_csv",
]
