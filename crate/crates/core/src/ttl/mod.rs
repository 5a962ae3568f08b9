//! Restricted Turtle ingestion: snapshot discovery, parsing into timestamped
//! quads, and validation against the microservice ontology.

mod parser;
mod schema;
mod snapshot;
mod term;
mod validate;

pub use parser::{parse_ttl, ParseError, ParseErrorKind};
pub use schema::{
    AttributeDef, Category, Hop, OntologySchema, RelationDef, RelationKind, SchemaError,
};
pub use snapshot::{
    parse_snapshot, parse_snapshots, scan_snapshot_dir, snapshot_file_name, ScanError, ScanResult,
    SnapshotError, SnapshotFile,
};
pub use term::{Literal, LiteralError, LiteralKind, Quad, Term, RDF_TYPE, XSD};
pub use validate::{validate_quads, ValidationReport, Verdict};
