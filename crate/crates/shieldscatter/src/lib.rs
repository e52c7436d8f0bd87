//! Backscatter-assisted physical-layer authentication at desk scale.
//!
//! A handful of battery-free tags near an access point reflect an ambient
//! carrier in turn, stamping every received message with a position-dependent
//! multi-path signature. This crate simulates that channel and implements the
//! detection pipeline that decides whether two messages came from the same
//! transmitter:
//!
//! 1. [`channel`] — synthetic complex-baseband traces with ground truth;
//! 2. [`segment`] — locating the backscatter-bearing region of a trace;
//! 3. [`features`] — six amplitude-derived feature series per segment;
//! 4. [`dtw`] — chunked dynamic-time-warping distances assembled into a
//!    488-value propagation profile;
//! 5. [`ocsvm`] — a ν one-class SVM trained on legitimate profiles;
//! 6. [`guard`] — end-to-end attack scenarios (deauthentication injection,
//!    jam-and-replay, signature spoofing) and batch metrics;
//! 7. [`dataset`] + [`io`] — reproducible dataset generation and file formats.

pub mod channel;
pub mod dataset;
pub mod dtw;
pub mod error;
pub mod features;
pub mod guard;
pub mod io;
pub mod ocsvm;
pub mod segment;

pub use channel::{
    coherence_time, make_tag_schedule, synthesize_trace, GroundTruth, SceneConfig, Source,
    TagSchedule, Trace,
};
pub use dtw::{build_profile, chunk_series, dtw_distance, Label, ProfileVector, PROFILE_LEN};
pub use error::{Error, Result};
pub use features::{extract_features, FeatureSet};
pub use guard::{
    evaluate_batch, run_scenario, Decision, MetricsReport, MetricsRow, Scenario, ScenarioConfig,
    SweepPoint, Transcript, Verdict,
};
pub use ocsvm::{auto_sigma, decide, gaussian_kernel, train, OcsvmConfig, OcsvmModel, SigmaMode};
pub use segment::{segment, Segment, SegmenterConfig, ThresholdMode};
