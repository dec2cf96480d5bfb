//! Charts, points, sections, algebroid data and the model-file loader.

pub mod algebroid;
pub mod chart;
pub mod model_file;
pub mod section;

pub use algebroid::{validate_algebroid, AlgebroidReport, AlgebroidValues, LieAlgebroidData};
pub use chart::{ChartKind, ChartPoint, ChartSpec};
pub use model_file::{load_model, parse_model, ModelKind, ModelSpec};
pub use section::{FieldSection, GridSpec};
