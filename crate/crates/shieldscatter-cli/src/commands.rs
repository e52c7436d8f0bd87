//! Subcommand implementations. Each takes a fully resolved, serializable
//! configuration (the thing the manifest records) plus an output directory,
//! and returns the relative paths of the artifacts it wrote.

use std::path::Path;

use serde::{Deserialize, Serialize};

use shieldscatter::channel::default_tag_ring;
use shieldscatter::dataset::{
    generate_attack_profiles, generate_benign_profiles, generate_dataset, AttackerPlacement,
};
use shieldscatter::guard::{MetricsReport, MetricsRow};
use shieldscatter::io as ssio;
use shieldscatter::ocsvm::{decide, train, OcsvmConfig, OcsvmModel, SigmaMode};
use shieldscatter::{Error, Label, ProfileVector, Result, SceneConfig};

fn ocsvm_config(nu: f64, sigma: Option<f64>) -> OcsvmConfig {
    OcsvmConfig {
        nu,
        sigma: sigma.map(SigmaMode::Fixed).unwrap_or(SigmaMode::Auto),
        ..OcsvmConfig::default()
    }
}

/// Accept/reject counts for a profile set under a model.
fn accepted_count(model: &OcsvmModel, profiles: &[ProfileVector]) -> Result<usize> {
    let mut accepted = 0;
    for p in profiles {
        if decide(model, &p.values)?.0 >= 0.0 {
            accepted += 1;
        }
    }
    Ok(accepted)
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub scene: SceneConfig,
    pub count: usize,
    pub seed: u64,
    pub attacker_min: f64,
    pub attacker_max: f64,
    pub write_traces: bool,
}

pub fn cmd_gen(cfg: &GenConfig, out_dir: &Path) -> Result<Vec<String>> {
    cfg.scene.validate()?;
    if !cfg.attacker_min.is_finite()
        || !cfg.attacker_max.is_finite()
        || cfg.attacker_min <= 0.0
        || cfg.attacker_max < cfg.attacker_min
    {
        return Err(Error::InvalidConfig(
            "attacker distance bounds must satisfy 0 < min <= max and be finite".into(),
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut artifacts = Vec::new();

    let records = generate_dataset(
        &cfg.scene,
        cfg.count,
        cfg.seed,
        AttackerPlacement {
            min_distance: cfg.attacker_min,
            max_distance: cfg.attacker_max,
        },
    )?;

    if cfg.write_traces && !records.is_empty() {
        let trace_dir = out_dir.join("traces");
        std::fs::create_dir_all(&trace_dir)?;
        for (i, record) in records.iter().enumerate() {
            let trial = i / 2;
            let kind = if record.label == Label::Legitimate {
                "benign"
            } else {
                "attack"
            };
            for (role, trace) in [("ref", &record.reference), ("sus", &record.suspect)] {
                let stem = format!("traces/{kind}_{trial:04}_{role}");
                let bin = format!("{stem}.bin");
                let truth = format!("{stem}.truth.json");
                ssio::write_trace(&out_dir.join(&bin), trace)?;
                if let Some(t) = &trace.truth {
                    ssio::write_truth(&out_dir.join(&truth), t)?;
                    artifacts.push(truth);
                }
                artifacts.push(bin);
            }
        }
    }

    let profiles: Vec<ProfileVector> = records.iter().map(|r| r.profile.clone()).collect();
    ssio::write_profiles(&out_dir.join("dataset.csv"), &profiles)?;
    artifacts.push("dataset.csv".into());
    Ok(artifacts)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Dataset CSV path (kept as given; may live outside the output dir).
    pub dataset: String,
    pub nu: f64,
    /// `None` selects the median-distance heuristic.
    pub sigma: Option<f64>,
    /// Cap on the number of positive rows used.
    pub train_size: Option<usize>,
    /// Model file name inside the output directory.
    pub model_name: String,
}

pub struct TrainOutcome {
    pub artifacts: Vec<String>,
    pub training_outlier_fraction: f64,
    pub support_vectors: usize,
}

pub fn cmd_train(cfg: &TrainConfig, out_dir: &Path) -> Result<TrainOutcome> {
    let all = ssio::read_profiles(Path::new(&cfg.dataset))?;
    let mut positives: Vec<ProfileVector> = all
        .into_iter()
        .filter(|p| p.label == Some(Label::Legitimate))
        .collect();
    if let Some(cap) = cfg.train_size {
        positives.truncate(cap);
    }
    if positives.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "dataset {} holds {} positive rows; at least 2 required",
            cfg.dataset,
            positives.len()
        )));
    }

    let model = train(&positives, &ocsvm_config(cfg.nu, cfg.sigma))?;
    let accepted = accepted_count(&model, &positives)?;
    let outlier_fraction = 1.0 - accepted as f64 / positives.len() as f64;

    std::fs::create_dir_all(out_dir)?;
    ssio::write_model(&out_dir.join(&cfg.model_name), &model)?;
    Ok(TrainOutcome {
        artifacts: vec![cfg.model_name.clone()],
        training_outlier_fraction: outlier_fraction,
        support_vectors: model.alphas.len(),
    })
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Nu,
    Distance,
    Tags,
    TrainSize,
    Ratio,
    Snr,
}

impl SweepParam {
    pub fn key(self) -> &'static str {
        match self {
            SweepParam::Nu => "nu",
            SweepParam::Distance => "distance",
            SweepParam::Tags => "tags",
            SweepParam::TrainSize => "train_size",
            SweepParam::Ratio => "ratio",
            SweepParam::Snr => "snr",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub scene: SceneConfig,
    pub param: SweepParam,
    pub grid: Vec<f64>,
    /// Evaluation trials per grid point, for benign and attack each.
    pub trials: usize,
    pub seed: u64,
    /// Benign profiles used to train the operating model.
    pub train_size: usize,
    /// ν of the operating model (ignored by the `nu` sweep itself).
    pub nu: f64,
    pub sigma: Option<f64>,
    pub attacker_min: f64,
    pub attacker_max: f64,
    /// CSV file name inside the output directory.
    pub out_name: String,
}

// Seed streams for the sweep stages.
const S_TRAIN: u64 = 101;
const S_EVAL_BENIGN: u64 = 102;
const S_EVAL_ATTACK: u64 = 103;
const S_NEGATIVES: u64 = 104;
const S_VALIDATION: u64 = 105;

fn d(master: u64, stream: u64, point: usize) -> u64 {
    shieldscatter::dataset::derive_seed(
        shieldscatter::dataset::derive_seed(master, stream),
        point as u64,
    )
}

/// ν candidates scanned when negatives are available for model selection.
const NU_SELECTION_GRID: [f64; 6] = [0.02, 0.05, 0.1, 0.16, 0.3, 0.5];

pub fn cmd_sweep(cfg: &SweepConfig, out_dir: &Path) -> Result<Vec<String>> {
    cfg.scene.validate()?;
    if cfg.grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grid must be non-empty".into()));
    }
    if cfg.trials == 0 || cfg.train_size < 2 {
        return Err(Error::InvalidConfig(
            "sweep needs trials >= 1 and train_size >= 2".into(),
        ));
    }
    if !cfg.attacker_min.is_finite()
        || !cfg.attacker_max.is_finite()
        || cfg.attacker_min <= 0.0
        || cfg.attacker_max < cfg.attacker_min
    {
        return Err(Error::InvalidConfig(
            "attacker distance bounds must satisfy 0 < min <= max and be finite".into(),
        ));
    }
    if cfg.grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("grid values must be finite".into()));
    }
    let placement = AttackerPlacement {
        min_distance: cfg.attacker_min,
        max_distance: cfg.attacker_max,
    };

    let mut rows: Vec<MetricsRow> = Vec::with_capacity(cfg.grid.len());
    let mut totals = (0usize, 0usize, 0usize, 0usize); // benign, accepted, attack, accepted

    let push_row = |rows: &mut Vec<MetricsRow>,
                        totals: &mut (usize, usize, usize, usize),
                        value: f64,
                        benign: (usize, usize),
                        attack: (usize, usize)| {
        totals.0 += benign.0;
        totals.1 += benign.1;
        totals.2 += attack.0;
        totals.3 += attack.1;
        rows.push(MetricsRow {
            scenario: "deauth_injection".into(),
            sweep_key: cfg.param.key().into(),
            sweep_value: Some(value),
            trials: benign.0 + attack.0,
            tp_rate: (benign.0 > 0).then(|| benign.1 as f64 / benign.0 as f64),
            fp_rate: (attack.0 > 0).then(|| attack.1 as f64 / attack.0 as f64),
            failures: 0,
        });
    };

    match cfg.param {
        SweepParam::Nu => {
            let train_set =
                generate_benign_profiles(&cfg.scene, cfg.train_size, d(cfg.seed, S_TRAIN, 0))?;
            let eb =
                generate_benign_profiles(&cfg.scene, cfg.trials, d(cfg.seed, S_EVAL_BENIGN, 0))?;
            let ea = generate_attack_profiles(
                &cfg.scene,
                cfg.trials,
                d(cfg.seed, S_EVAL_ATTACK, 0),
                placement,
            )?;
            for &nu in &cfg.grid {
                let model = train(&train_set, &ocsvm_config(nu, cfg.sigma))?;
                let tp = accepted_count(&model, &eb)?;
                let fp = accepted_count(&model, &ea)?;
                push_row(&mut rows, &mut totals, nu, (eb.len(), tp), (ea.len(), fp));
            }
        }
        SweepParam::Distance => {
            let train_set =
                generate_benign_profiles(&cfg.scene, cfg.train_size, d(cfg.seed, S_TRAIN, 0))?;
            let model = train(&train_set, &ocsvm_config(cfg.nu, cfg.sigma))?;
            let eb =
                generate_benign_profiles(&cfg.scene, cfg.trials, d(cfg.seed, S_EVAL_BENIGN, 0))?;
            let tp = accepted_count(&model, &eb)?;
            for (point, &dist) in cfg.grid.iter().enumerate() {
                if dist <= 0.0 {
                    return Err(Error::InvalidConfig("distances must be positive".into()));
                }
                let ea = generate_attack_profiles(
                    &cfg.scene,
                    cfg.trials,
                    d(cfg.seed, S_EVAL_ATTACK, point),
                    AttackerPlacement {
                        min_distance: dist,
                        max_distance: dist,
                    },
                )?;
                let fp = accepted_count(&model, &ea)?;
                push_row(&mut rows, &mut totals, dist, (eb.len(), tp), (ea.len(), fp));
            }
        }
        SweepParam::Tags => {
            for (point, &value) in cfg.grid.iter().enumerate() {
                let count = value as usize;
                if count < 1 || (value - count as f64).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(
                        "tags grid must hold positive integers".into(),
                    ));
                }
                let mut scene = cfg.scene.clone();
                scene.tag_count = count;
                scene.tag_positions = default_tag_ring(count);
                let train_set =
                    generate_benign_profiles(&scene, cfg.train_size, d(cfg.seed, S_TRAIN, point))?;
                let model = train(&train_set, &ocsvm_config(cfg.nu, cfg.sigma))?;
                let eb = generate_benign_profiles(
                    &scene,
                    cfg.trials,
                    d(cfg.seed, S_EVAL_BENIGN, point),
                )?;
                let ea = generate_attack_profiles(
                    &scene,
                    cfg.trials,
                    d(cfg.seed, S_EVAL_ATTACK, point),
                    placement,
                )?;
                let tp = accepted_count(&model, &eb)?;
                let fp = accepted_count(&model, &ea)?;
                push_row(&mut rows, &mut totals, value, (eb.len(), tp), (ea.len(), fp));
            }
        }
        SweepParam::TrainSize => {
            let max_size = cfg.grid.iter().cloned().fold(0.0f64, f64::max) as usize;
            if max_size < 2 {
                return Err(Error::InvalidConfig(
                    "train_size grid must reach at least 2".into(),
                ));
            }
            let all_train =
                generate_benign_profiles(&cfg.scene, max_size, d(cfg.seed, S_TRAIN, 0))?;
            let eb =
                generate_benign_profiles(&cfg.scene, cfg.trials, d(cfg.seed, S_EVAL_BENIGN, 0))?;
            let ea = generate_attack_profiles(
                &cfg.scene,
                cfg.trials,
                d(cfg.seed, S_EVAL_ATTACK, 0),
                placement,
            )?;
            for &value in &cfg.grid {
                let size = value as usize;
                if size < 2 || size > max_size {
                    return Err(Error::InvalidConfig(format!(
                        "train size {value} outside [2, {max_size}]"
                    )));
                }
                let model = train(&all_train[..size], &ocsvm_config(cfg.nu, cfg.sigma))?;
                let tp = accepted_count(&model, &eb)?;
                let fp = accepted_count(&model, &ea)?;
                push_row(&mut rows, &mut totals, value, (eb.len(), tp), (ea.len(), fp));
            }
        }
        SweepParam::Ratio => {
            let positives =
                generate_benign_profiles(&cfg.scene, cfg.train_size, d(cfg.seed, S_TRAIN, 0))?;
            let val_benign = generate_benign_profiles(
                &cfg.scene,
                (cfg.train_size / 4).clamp(10, 50),
                d(cfg.seed, S_VALIDATION, 0),
            )?;
            let eb =
                generate_benign_profiles(&cfg.scene, cfg.trials, d(cfg.seed, S_EVAL_BENIGN, 0))?;
            let ea = generate_attack_profiles(
                &cfg.scene,
                cfg.trials,
                d(cfg.seed, S_EVAL_ATTACK, 0),
                placement,
            )?;
            for (point, &ratio) in cfg.grid.iter().enumerate() {
                if !(0.0..=1.0).contains(&ratio) {
                    return Err(Error::InvalidConfig(
                        "negative-to-positive ratios must lie in [0, 1]".into(),
                    ));
                }
                let neg_count = (ratio * cfg.train_size as f64).ceil() as usize;
                let negatives = generate_attack_profiles(
                    &cfg.scene,
                    neg_count,
                    d(cfg.seed, S_NEGATIVES, point),
                    placement,
                )?;
                // Negatives never enter the dual; they only pick ν.
                let mut best = (f64::NEG_INFINITY, NU_SELECTION_GRID[0]);
                for &nu in &NU_SELECTION_GRID {
                    let model = train(&positives, &ocsvm_config(nu, cfg.sigma))?;
                    let tp = accepted_count(&model, &val_benign)? as f64
                        / val_benign.len().max(1) as f64;
                    let tn = if negatives.is_empty() {
                        1.0
                    } else {
                        1.0 - accepted_count(&model, &negatives)? as f64 / negatives.len() as f64
                    };
                    let balanced = (tp + tn) / 2.0;
                    if balanced > best.0 {
                        best = (balanced, nu);
                    }
                }
                let model = train(&positives, &ocsvm_config(best.1, cfg.sigma))?;
                let tp = accepted_count(&model, &eb)?;
                let fp = accepted_count(&model, &ea)?;
                push_row(&mut rows, &mut totals, ratio, (eb.len(), tp), (ea.len(), fp));
            }
        }
        SweepParam::Snr => {
            for (point, &snr) in cfg.grid.iter().enumerate() {
                let mut scene = cfg.scene.clone();
                scene.snr_db = snr;
                let train_set =
                    generate_benign_profiles(&scene, cfg.train_size, d(cfg.seed, S_TRAIN, point))?;
                let model = train(&train_set, &ocsvm_config(cfg.nu, cfg.sigma))?;
                let eb = generate_benign_profiles(
                    &scene,
                    cfg.trials,
                    d(cfg.seed, S_EVAL_BENIGN, point),
                )?;
                let ea = generate_attack_profiles(
                    &scene,
                    cfg.trials,
                    d(cfg.seed, S_EVAL_ATTACK, point),
                    placement,
                )?;
                let tp = accepted_count(&model, &eb)?;
                let fp = accepted_count(&model, &ea)?;
                push_row(&mut rows, &mut totals, snr, (eb.len(), tp), (ea.len(), fp));
            }
        }
    }

    let report = MetricsReport {
        benign_total: totals.0,
        benign_accepted: totals.1,
        attack_total: totals.2,
        attack_accepted: totals.3,
        failures: 0,
        rows,
    };

    std::fs::create_dir_all(out_dir)?;
    let csv_name = cfg.out_name.clone();
    let json_name = format!(
        "{}.json",
        csv_name.strip_suffix(".csv").unwrap_or(&csv_name)
    );
    ssio::write_metrics_csv(&out_dir.join(&csv_name), &report)?;
    ssio::write_metrics_json(&out_dir.join(&json_name), &report)?;
    Ok(vec![csv_name, json_name])
}
