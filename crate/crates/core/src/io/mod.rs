//! File formats: embedding files, the audit manifest, reports and plots.

pub mod emb;
pub mod manifest;
pub mod plot;
pub mod report;

pub use emb::{read_embeddings, write_embeddings, EmbeddingFileError};
pub use manifest::{parse_manifest, AuditManifest, ManifestError};
pub use plot::{emit_sweep_plot, render_sweep_svg};
pub use report::{emit_report, AuditReport, ReportFormat};
