//! End-to-end security scenarios and batch metrics.
//!
//! Each scenario plays one challenge-response exchange against a trained
//! model: a reference message and a suspect message are synthesized inside
//! the coherence budget, compared via the segmentation → features → chunked
//! DTW pipeline, and the suspect is accepted only if the one-class model
//! scores the profile non-negative.
//!
//! Attack flavors:
//! * deauthentication injection — the suspect command comes from the
//!   attacker's position;
//! * jam-and-replay — the reference arrives jammed (user and attacker
//!   superposed) and the suspect is the attacker's replay;
//! * spoof emulation — the attacker reproduces the user's per-tag signatures
//!   but has to guess the session's secret tag order, and always guesses the
//!   canonical one.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{synthesize_trace, SceneConfig, Source, TagSchedule, Trace};
use crate::dataset::{derive_seed, profile_from_traces, session_schedule};
use crate::error::{Error, Result};
use crate::ocsvm::{decide, OcsvmModel};
use crate::segment::SegmenterConfig;

/// Default coherence budget in seconds.
pub const DEFAULT_COHERENCE_BUDGET: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Benign,
    DeauthInjection,
    JamAndReplay,
    SpoofEmulation,
}

impl Scenario {
    pub fn is_attack(self) -> bool {
        self != Scenario::Benign
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Benign => "benign",
            Scenario::DeauthInjection => "deauth_injection",
            Scenario::JamAndReplay => "jam_and_replay",
            Scenario::SpoofEmulation => "spoof_emulation",
        }
    }
}

/// Key/value pair a sweep attaches to its trials for grouped reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub key: String,
    pub value: f64,
}

/// Everything needed to play one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scene: SceneConfig,
    pub scenario: Scenario,
    pub model: Arc<OcsvmModel>,
    pub seed: u64,
    /// Maximum total exchange duration in seconds.
    pub coherence_budget: f64,
    /// Optional sweep grouping for [`evaluate_batch`].
    pub group: Option<SweepPoint>,
}

impl ScenarioConfig {
    pub fn new(scene: SceneConfig, scenario: Scenario, model: Arc<OcsvmModel>, seed: u64) -> Self {
        ScenarioConfig {
            scene,
            scenario,
            model,
            seed,
            coherence_budget: DEFAULT_COHERENCE_BUDGET,
            group: None,
        }
    }

    pub fn with_group(mut self, key: impl Into<String>, value: f64) -> Self {
        self.group = Some(SweepPoint {
            key: key.into(),
            value,
        });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageRole {
    UserMsg,
    Ack,
    Deauth,
    ReplayedMsg,
    SuspectMsg,
}

/// One over-the-air message of a transcript.
#[derive(Debug, Clone)]
pub struct TranscriptMessage {
    pub role: MessageRole,
    pub trace: Trace,
}

/// The messages exchanged in one session, all under one AP-commanded
/// tag order.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub messages: Vec<TranscriptMessage>,
    pub tag_order: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

/// The AP's ruling on a suspect message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub decision: Decision,
    pub score: f64,
    /// Indices into the transcript of the (reference, suspect) pair compared.
    pub compared_pair: (usize, usize),
}

/// Play one scenario end to end.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(Transcript, Verdict)> {
    cfg.scene.validate()?;
    let schedule = session_schedule(&cfg.scene, cfg.seed)?;
    let exchange_seconds =
        2.0 * schedule.total_samples() as f64 / cfg.scene.sample_rate;
    if exchange_seconds > cfg.coherence_budget {
        return Err(Error::invalid(format!(
            "exchange of {exchange_seconds:.3}s exceeds coherence budget {:.3}s",
            cfg.coherence_budget
        )));
    }

    let ref_seed = derive_seed(cfg.seed, 1);
    let sus_seed = derive_seed(cfg.seed, 2);
    let (reference, suspect) = match cfg.scenario {
        Scenario::Benign => (
            message(
                MessageRole::UserMsg,
                &cfg.scene,
                &schedule,
                Source::User,
                ref_seed,
                0,
            )?,
            message(
                MessageRole::SuspectMsg,
                &cfg.scene,
                &schedule,
                Source::User,
                sus_seed,
                1,
            )?,
        ),
        Scenario::DeauthInjection => (
            message(
                MessageRole::UserMsg,
                &cfg.scene,
                &schedule,
                Source::User,
                ref_seed,
                0,
            )?,
            message(
                MessageRole::Deauth,
                &cfg.scene,
                &schedule,
                Source::Attacker,
                sus_seed,
                1,
            )?,
        ),
        Scenario::JamAndReplay => (
            // the reference reception is jammed: user and attacker superpose
            message(
                MessageRole::UserMsg,
                &cfg.scene,
                &schedule,
                Source::Superposed,
                ref_seed,
                0,
            )?,
            message(
                MessageRole::ReplayedMsg,
                &cfg.scene,
                &schedule,
                Source::Attacker,
                sus_seed,
                1,
            )?,
        ),
        Scenario::SpoofEmulation => {
            let reference = message(
                MessageRole::UserMsg,
                &cfg.scene,
                &schedule,
                Source::User,
                ref_seed,
                0,
            )?;
            // The attacker reproduces the user's per-tag signatures but does
            // not know the session order, so it applies them canonically.
            let guessed = TagSchedule {
                order: (0..cfg.scene.tag_count).collect(),
                ..schedule.clone()
            };
            let suspect = message(
                MessageRole::SuspectMsg,
                &cfg.scene,
                &guessed,
                Source::User,
                sus_seed,
                1,
            )?;
            (reference, suspect)
        }
    };

    let seg_cfg = SegmenterConfig::for_scene(&cfg.scene, &schedule);
    let profile = profile_from_traces(&reference.trace, &suspect.trace, &seg_cfg, None)
        .map_err(|e| match e {
            Error::Scenario { .. } => e,
            other => Error::Scenario {
                message_index: 0,
                reason: other.to_string(),
            },
        })?;
    let (score, _) = decide(&cfg.model, &profile.values)?;
    let verdict = Verdict {
        decision: if score >= 0.0 {
            Decision::Accept
        } else {
            Decision::Reject
        },
        score,
        compared_pair: (0, 1),
    };
    Ok((
        Transcript {
            messages: vec![reference, suspect],
            tag_order: schedule.order.clone(),
        },
        verdict,
    ))
}

fn message(
    role: MessageRole,
    scene: &SceneConfig,
    schedule: &TagSchedule,
    source: Source,
    seed: u64,
    index: usize,
) -> Result<TranscriptMessage> {
    let trace = synthesize_trace(scene, schedule, source, seed).map_err(|e| Error::Scenario {
        message_index: index,
        reason: e.to_string(),
    })?;
    Ok(TranscriptMessage { role, trace })
}

/// Metrics for one reporting group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub sweep_key: String,
    pub sweep_value: Option<f64>,
    pub trials: usize,
    pub tp_rate: Option<f64>,
    pub fp_rate: Option<f64>,
    pub failures: usize,
}

/// Batch evaluation results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub benign_total: usize,
    pub benign_accepted: usize,
    pub attack_total: usize,
    pub attack_accepted: usize,
    pub failures: usize,
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    /// Accepted benign / total benign; `None` when no benign trials ran.
    pub fn tp_rate(&self) -> Option<f64> {
        (self.benign_total > 0).then(|| self.benign_accepted as f64 / self.benign_total as f64)
    }

    /// Accepted attacks / total attacks (attacker passed off as legitimate);
    /// `None` when no attack trials ran.
    pub fn fp_rate(&self) -> Option<f64> {
        (self.attack_total > 0).then(|| self.attack_accepted as f64 / self.attack_total as f64)
    }
}

struct TrialOutcome {
    is_attack: bool,
    accepted: bool,
    failed: bool,
    scenario: &'static str,
    group: Option<SweepPoint>,
}

/// Run every scenario (in parallel) and aggregate acceptance metrics.
///
/// A pipeline failure is fail-closed: the suspect is treated as rejected,
/// which defends against attacks and counts as a false alarm on benign
/// traffic. Failures are also tallied on their own.
pub fn evaluate_batch(scenarios: &[ScenarioConfig]) -> MetricsReport {
    let outcomes: Vec<TrialOutcome> = scenarios
        .par_iter()
        .map(|cfg| {
            let (accepted, failed) = match run_scenario(cfg) {
                Ok((_, verdict)) => (verdict.decision == Decision::Accept, false),
                Err(_) => (false, true),
            };
            TrialOutcome {
                is_attack: cfg.scenario.is_attack(),
                accepted,
                failed,
                scenario: cfg.scenario.name(),
                group: cfg.group.clone(),
            }
        })
        .collect();

    let mut report = MetricsReport {
        benign_total: 0,
        benign_accepted: 0,
        attack_total: 0,
        attack_accepted: 0,
        failures: 0,
        rows: Vec::new(),
    };

    #[derive(Default)]
    struct Counts {
        benign: usize,
        benign_accepted: usize,
        attack: usize,
        attack_accepted: usize,
        failures: usize,
        attack_name: Option<&'static str>,
    }

    let mut groups: Vec<((String, Option<f64>), Counts)> = Vec::new();
    for o in &outcomes {
        if o.is_attack {
            report.attack_total += 1;
            report.attack_accepted += o.accepted as usize;
        } else {
            report.benign_total += 1;
            report.benign_accepted += o.accepted as usize;
        }
        report.failures += o.failed as usize;

        let key = match &o.group {
            Some(g) => (g.key.clone(), Some(g.value)),
            None => (String::new(), None),
        };
        let slot = match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, c)) => c,
            None => {
                groups.push((key, Counts::default()));
                &mut groups.last_mut().unwrap().1
            }
        };
        if o.is_attack {
            slot.attack += 1;
            slot.attack_accepted += o.accepted as usize;
            slot.attack_name = Some(o.scenario);
        } else {
            slot.benign += 1;
            slot.benign_accepted += o.accepted as usize;
        }
        slot.failures += o.failed as usize;
    }

    for ((key, value), c) in groups {
        report.rows.push(MetricsRow {
            scenario: c.attack_name.unwrap_or("benign").to_string(),
            sweep_key: key,
            sweep_value: value,
            trials: c.benign + c.attack,
            tp_rate: (c.benign > 0).then(|| c.benign_accepted as f64 / c.benign as f64),
            fp_rate: (c.attack > 0).then(|| c.attack_accepted as f64 / c.attack as f64),
            failures: c.failures,
        });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::generate_benign_profiles;
    use crate::ocsvm::{train, OcsvmConfig, SigmaMode};
    use std::sync::OnceLock;

    /// One model shared by the guard tests: 200 benign sessions of the
    /// default scene, ν small and kernel width doubled so held-out benign
    /// traffic passes comfortably.
    fn shared_model() -> Arc<OcsvmModel> {
        static MODEL: OnceLock<Arc<OcsvmModel>> = OnceLock::new();
        Arc::clone(MODEL.get_or_init(|| {
            let scene = SceneConfig::default();
            let profiles = generate_benign_profiles(&scene, 200, 555).unwrap();
            let vectors: Vec<Vec<f64>> =
                profiles.iter().map(|p| p.values.clone()).collect();
            let sigma = 2.0 * crate::ocsvm::auto_sigma(&vectors).unwrap();
            let cfg = OcsvmConfig {
                nu: 0.02,
                sigma: SigmaMode::Fixed(sigma),
                ..OcsvmConfig::default()
            };
            Arc::new(train(&profiles, &cfg).unwrap())
        }))
    }

    #[test]
    fn benign_sessions_are_mostly_accepted() {
        let scene = SceneConfig::default();
        let model = shared_model();
        let mut accepted = 0;
        let total = 20;
        for t in 0..total {
            let cfg = ScenarioConfig::new(
                scene.clone(),
                Scenario::Benign,
                Arc::clone(&model),
                derive_seed(777, t),
            );
            let (transcript, verdict) = run_scenario(&cfg).unwrap();
            assert_eq!(transcript.messages.len(), 2);
            assert_eq!(verdict.compared_pair, (0, 1));
            assert_eq!(verdict.decision == Decision::Accept, verdict.score >= 0.0);
            accepted += (verdict.decision == Decision::Accept) as usize;
        }
        assert!(accepted >= 17, "only {accepted}/{total} benign accepted");
    }

    #[test]
    fn deauth_injection_is_mostly_rejected() {
        let scene = SceneConfig::default();
        let model = shared_model();
        let mut rejected = 0;
        let total = 20;
        for t in 0..total {
            let cfg = ScenarioConfig::new(
                scene.clone(),
                Scenario::DeauthInjection,
                Arc::clone(&model),
                derive_seed(888, t),
            );
            let (transcript, verdict) = run_scenario(&cfg).unwrap();
            assert_eq!(transcript.messages[1].role, MessageRole::Deauth);
            rejected += (verdict.decision == Decision::Reject) as usize;
        }
        assert!(rejected >= 17, "only {rejected}/{total} attacks rejected");
    }

    #[test]
    fn jam_reference_is_superposed() {
        let scene = SceneConfig {
            snr_db: f64::INFINITY,
            ..SceneConfig::default()
        };
        let model = shared_model();
        let cfg = ScenarioConfig::new(scene.clone(), Scenario::JamAndReplay, model, 4242);
        let (transcript, verdict) = run_scenario(&cfg).unwrap();
        // reconstruct the same superposition directly from the channel
        let schedule = session_schedule(&scene, 4242).unwrap();
        let expected = synthesize_trace(
            &scene,
            &schedule,
            Source::Superposed,
            derive_seed(4242, 1),
        )
        .unwrap();
        assert_eq!(transcript.messages[0].trace.samples, expected.samples);
        assert_eq!(transcript.messages[1].role, MessageRole::ReplayedMsg);
        // jammed reference vs replay: clearly not the same propagation
        assert_eq!(verdict.decision, Decision::Reject);
    }

    #[test]
    fn spoof_with_wrong_guess_is_rejected() {
        let scene = SceneConfig::default();
        let model = shared_model();
        // session seed chosen so the drawn order is not the identity
        let mut seed = 100;
        let schedule = loop {
            let s = session_schedule(&scene, seed).unwrap();
            if s.order != vec![0, 1, 2] {
                break s;
            }
            seed += 1;
        };
        let cfg = ScenarioConfig::new(scene, Scenario::SpoofEmulation, model, seed);
        let (transcript, verdict) = run_scenario(&cfg).unwrap();
        assert_eq!(transcript.tag_order, schedule.order);
        assert_eq!(verdict.decision, Decision::Reject);
    }

    #[test]
    fn transcript_messages_share_the_session_tag_order() {
        let scene = SceneConfig::default();
        let model = shared_model();
        let cfg = ScenarioConfig::new(scene.clone(), Scenario::Benign, model, 31337);
        let (transcript, _) = run_scenario(&cfg).unwrap();
        for msg in &transcript.messages {
            let truth = msg.trace.truth.as_ref().unwrap();
            assert_eq!(truth.tag_order, transcript.tag_order);
        }
    }

    #[test]
    fn coherence_budget_is_enforced() {
        let scene = SceneConfig::default();
        let model = shared_model();
        let mut cfg = ScenarioConfig::new(scene, Scenario::Benign, model, 1);
        cfg.coherence_budget = 0.05; // two 40 ms messages cannot fit
        assert!(run_scenario(&cfg).is_err());
    }

    #[test]
    fn batch_arithmetic_matches_hand_counts() {
        // an all-benign batch first
        let scene = SceneConfig::default();
        let model = shared_model();
        let benign: Vec<ScenarioConfig> = (0..6)
            .map(|t| {
                ScenarioConfig::new(
                    scene.clone(),
                    Scenario::Benign,
                    Arc::clone(&model),
                    derive_seed(9000, t),
                )
            })
            .collect();
        let report = evaluate_batch(&benign);
        assert_eq!(report.attack_total, 0);
        assert_eq!(report.fp_rate(), None);
        assert_eq!(report.benign_total, 6);

        let mixed: Vec<ScenarioConfig> = benign
            .into_iter()
            .chain((0..6).map(|t| {
                ScenarioConfig::new(
                    scene.clone(),
                    Scenario::DeauthInjection,
                    Arc::clone(&model),
                    derive_seed(9100, t),
                )
            }))
            .collect();
        let report = evaluate_batch(&mixed);
        assert_eq!(report.benign_total, 6);
        assert_eq!(report.attack_total, 6);
        assert_eq!(
            report.tp_rate().unwrap(),
            report.benign_accepted as f64 / 6.0
        );
    }

    #[test]
    fn report_rates_are_plain_ratios() {
        let report = MetricsReport {
            benign_total: 10,
            benign_accepted: 10,
            attack_total: 20,
            attack_accepted: 1,
            failures: 0,
            rows: vec![],
        };
        assert_eq!(report.tp_rate(), Some(1.0));
        assert_eq!(report.fp_rate(), Some(0.05));
        let no_attacks = MetricsReport {
            attack_total: 0,
            attack_accepted: 0,
            ..report
        };
        assert_eq!(no_attacks.fp_rate(), None);
    }

    #[test]
    fn grouped_rows_preserve_sweep_points() {
        let scene = SceneConfig::default();
        let model = shared_model();
        let scenarios: Vec<ScenarioConfig> = (0..4)
            .map(|t| {
                ScenarioConfig::new(
                    scene.clone(),
                    Scenario::DeauthInjection,
                    Arc::clone(&model),
                    derive_seed(9200, t),
                )
                .with_group("distance", if t < 2 { 0.5 } else { 1.0 })
            })
            .collect();
        let report = evaluate_batch(&scenarios);
        assert_eq!(report.rows.len(), 2);
        assert!(report
            .rows
            .iter()
            .all(|r| r.sweep_key == "distance" && r.trials == 2));
    }
}
