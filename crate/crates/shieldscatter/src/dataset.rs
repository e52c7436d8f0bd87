//! Reproducible session and dataset generation.
//!
//! A "session" is one challenge-response exchange: a reference message and a
//! suspect message synthesized under a shared, freshly randomized tag order.
//! Both messages run through segmentation and feature extraction, and the
//! chunked-DTW comparison of their feature sets becomes one labeled profile.
//! All randomness is derived from `(master seed, trial index)`, so dataset
//! layout never depends on thread count or generation order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{make_tag_schedule, synthesize_trace, SceneConfig, Source, TagSchedule, Trace};
use crate::dtw::{build_profile, Label, ProfileVector};
use crate::error::Result;
use crate::features::extract_features;
use crate::segment::{segment, SegmenterConfig};

/// Stable child-seed derivation (splitmix64 over the pair).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// Sub-stream indices inside one session.
const SESSION_ORDER: u64 = 0;
const SESSION_REFERENCE: u64 = 1;
const SESSION_SUSPECT: u64 = 2;
const SESSION_PLACEMENT: u64 = 3;

/// One generated session, ready for file export or training.
#[derive(Debug, Clone)]
pub struct SessionRecord {
    pub label: Label,
    pub reference: Trace,
    pub suspect: Trace,
    pub profile: ProfileVector,
}

/// Segment, featurize and compare two messages of one session.
pub fn profile_from_traces(
    reference: &Trace,
    suspect: &Trace,
    cfg: &SegmenterConfig,
    label: Option<Label>,
) -> Result<ProfileVector> {
    let ref_features = extract_features(&segment(reference, cfg)?)?;
    let sus_features = extract_features(&segment(suspect, cfg)?)?;
    let mut profile = build_profile(&ref_features, &sus_features)?;
    profile.label = label;
    Ok(profile)
}

/// Fresh random tag order for a session.
pub fn session_schedule(scene: &SceneConfig, seed: u64) -> Result<TagSchedule> {
    let order = make_tag_schedule(scene.tag_count, derive_seed(seed, SESSION_ORDER))?.order;
    Ok(TagSchedule::for_scene(scene, order))
}

/// Run one session where the suspect message comes from `suspect_source`.
pub fn run_session(
    scene: &SceneConfig,
    suspect_source: Source,
    seed: u64,
) -> Result<SessionRecord> {
    let schedule = session_schedule(scene, seed)?;
    let seg_cfg = SegmenterConfig::for_scene(scene, &schedule);
    let reference = synthesize_trace(
        scene,
        &schedule,
        Source::User,
        derive_seed(seed, SESSION_REFERENCE),
    )?;
    let suspect = synthesize_trace(
        scene,
        &schedule,
        suspect_source,
        derive_seed(seed, SESSION_SUSPECT),
    )?;
    let label = if suspect_source == Source::User {
        Label::Legitimate
    } else {
        Label::Attack
    };
    let profile = profile_from_traces(&reference, &suspect, &seg_cfg, Some(label))?;
    Ok(SessionRecord {
        label,
        reference,
        suspect,
        profile,
    })
}

/// Place the attacker at a random angle and distance from the user.
///
/// Distances are drawn uniformly from `[min_distance, max_distance]`, which
/// keeps the attacker clear of the AP and tag ring for desk-scale scenes.
pub fn randomize_attacker(
    scene: &SceneConfig,
    min_distance: f64,
    max_distance: f64,
    seed: u64,
) -> SceneConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SESSION_PLACEMENT));
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let d = rng.random_range(min_distance..=max_distance);
    let mut out = scene.clone();
    out.attacker_position = [
        scene.user_position[0] + d * angle.cos(),
        scene.user_position[1] + d * angle.sin(),
    ];
    out
}

/// Attacker placement policy for dataset generation.
#[derive(Debug, Clone, Copy)]
pub struct AttackerPlacement {
    pub min_distance: f64,
    pub max_distance: f64,
}

impl Default for AttackerPlacement {
    fn default() -> Self {
        AttackerPlacement {
            min_distance: 0.5,
            max_distance: 1.5,
        }
    }
}

/// Generate `count` benign and `count` attack sessions.
///
/// Sessions are independent and generated in parallel; record `2i` is the
/// benign session of trial `i` and record `2i+1` its attack counterpart.
pub fn generate_dataset(
    scene: &SceneConfig,
    count: usize,
    seed: u64,
    placement: AttackerPlacement,
) -> Result<Vec<SessionRecord>> {
    let results: Vec<Result<[SessionRecord; 2]>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let benign_seed = derive_seed(seed, 2 * i as u64);
            let attack_seed = derive_seed(seed, 2 * i as u64 + 1);
            let benign = run_session(scene, Source::User, benign_seed)?;
            let attack_scene = randomize_attacker(
                scene,
                placement.min_distance,
                placement.max_distance,
                attack_seed,
            );
            let attack = run_session(&attack_scene, Source::Attacker, attack_seed)?;
            Ok([benign, attack])
        })
        .collect();
    let mut records = Vec::with_capacity(2 * count);
    for r in results {
        let [b, a] = r?;
        records.push(b);
        records.push(a);
    }
    Ok(records)
}

/// Generate only benign profiles (the usual training input).
pub fn generate_benign_profiles(
    scene: &SceneConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<ProfileVector>> {
    let results: Vec<Result<ProfileVector>> = (0..count)
        .into_par_iter()
        .map(|i| Ok(run_session(scene, Source::User, derive_seed(seed, i as u64))?.profile))
        .collect();
    results.into_iter().collect()
}

/// Generate attack profiles with the attacker re-placed per trial.
pub fn generate_attack_profiles(
    scene: &SceneConfig,
    count: usize,
    seed: u64,
    placement: AttackerPlacement,
) -> Result<Vec<ProfileVector>> {
    let results: Vec<Result<ProfileVector>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let trial_seed = derive_seed(seed, i as u64);
            let s = randomize_attacker(
                scene,
                placement.min_distance,
                placement.max_distance,
                trial_seed,
            );
            Ok(run_session(&s, Source::Attacker, trial_seed)?.profile)
        })
        .collect();
    results.into_iter().collect()
}
