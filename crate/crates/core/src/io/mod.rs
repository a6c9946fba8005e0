//! File formats and serialization: the binary gradient-dump format, CSV/JSON
//! report writers, and SVG plot rendering.

pub mod dump;
pub mod report;
pub mod svg;

pub use dump::{generate_dump, read_dump, write_dump, DumpManifest, ManifestBlock, FORMAT_VERSION};
pub use report::{
    fmt_f64, parse_scores_csv, write_bench_csv, write_recall_csv, write_run_json, write_scores_csv,
    write_selection_csv, write_traces_csv,
};
pub use svg::{is_well_formed_xml, render_plot, PlotConfig, PlotSeries};
