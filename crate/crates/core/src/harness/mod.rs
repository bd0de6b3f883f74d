//! Drivers around the library: the simulation grid, file formats and the
//! end-to-end detection pipeline.

mod detect;
mod io;
mod simulate;

pub use detect::{detect_embedded, run_detect, sweep_theta, theta_grid, DetectOptions, Detection, Method, ThetaPoint};
pub use io::{
    align_labels, density_threshold, load_edgelist, load_labels, parse_edgelist, read_label_lines, read_label_map,
    read_matrix, threshold_similarity, top_classes, write_edgelist, write_labels, EdgeList, Labels,
};
pub use simulate::{
    quantile, read_records_csv, run_simulation, summarize, write_records_csv, write_summary_json, CellSummary,
    ExperimentConfig, ExperimentRecord, MethodChoice, Spread, Summary,
};
