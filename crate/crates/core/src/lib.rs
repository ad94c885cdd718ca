//! Event-camera stream processing for frame-based models.
//!
//! The pipeline is: load or simulate an [`EventStream`], cut it into
//! [`Segment`]s (fixed event count, fixed time length, fixed active-pixel
//! count, or a query window ending at a given time), render each segment into
//! a [`Frame`] (EC, LNES, LNEC, LNECS, LNEWCS), optionally augment it, and
//! evaluate predicted keypoints against ground truth with palm-normalized PCK.

pub mod augment;
pub mod error;
pub mod event;
pub mod frame;
pub mod io;
pub mod keypoints;
pub mod manifest;
pub mod metrics;
pub mod representation;
pub mod segment;
pub mod simulator;

pub use crate::error::{Error, Result};
pub use crate::event::{Event, EventStream, Polarity, SensorGeometry};
pub use crate::frame::{Channel, Frame};
pub use crate::io::{load_stream, write_stream, Format, LoadOptions};
pub use crate::keypoints::{KeypointSet, Trajectory, JOINT_COUNT, MIDDLE_MCP, WRIST};
pub use crate::representation::{BinningMap, Representation};
pub use crate::segment::{Provenance, Segment, TailPolicy};
