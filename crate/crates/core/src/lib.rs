//! Landmark-based route evaluation: significance inference, landmark
//! selection, question ordering, worker familiarity and worker selection.

pub mod assign;
pub mod error;
pub mod familiarity;
pub mod geo;
pub mod io;
pub mod landmark;
pub mod question;
pub mod route;
pub mod select;
pub mod significance;

pub use error::{AssignError, FormatError, GeoError, ModelError, PmfError, SelectError, SignificanceError, TreeError};
pub use geo::GeoPoint;
pub use landmark::{Landmark, LandmarkId, LandmarkIndex, SignificanceLookup};
pub use route::{CandidateSet, LandmarkRoute, RawRoute};
