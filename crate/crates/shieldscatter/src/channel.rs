//! Synthetic complex-baseband channel for a desk-scale backscatter deployment.
//!
//! One access point (AP) receives a continuous carrier from either the
//! legitimate user or an attacker while battery-free tags near the AP reflect
//! the carrier in turn. Each tag adds an on/off-keyed reflected path whose
//! amplitude depends on the transmitter-to-tag and tag-to-AP distances, so the
//! set of per-tag levels forms a position-dependent signature at the AP.
//!
//! Propagation is free-space: amplitude falls off as `1/d` with a phase of
//! `2πd/λ` per path. Receiver noise is AWGN scaled to a requested SNR, and a
//! dynamic environment can be approximated with multiplicative Gaussian gain
//! noise. Everything is a pure function of `(config, seed)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation speed used for wavelength and coherence-time conversions (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Carrier offset from DC as a fraction of the sample rate. The received
/// baseband signal is a complex exponential at this offset so amplitude
/// features have a live carrier underneath them.
pub const CARRIER_OFFSET_FRACTION: f64 = 0.01;

/// Which transmitter the AP hears during a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    User,
    Attacker,
    /// User and attacker transmitting at once (jamming); the received trace
    /// is the sample-wise sum of both propagation paths.
    Superposed,
}

/// Static description of the desk-scale scene.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneConfig {
    /// Carrier frequency in Hz.
    pub carrier_frequency: f64,
    /// Receiver sample rate in samples/s.
    pub sample_rate: f64,
    /// Number of backscatter tags deployed around the AP.
    pub tag_count: usize,
    /// Tag coordinates in meters, one per tag.
    pub tag_positions: Vec<[f64; 2]>,
    /// AP (receiver) coordinates in meters.
    pub ap_position: [f64; 2],
    /// Legitimate user coordinates in meters.
    pub user_position: [f64; 2],
    /// Attacker coordinates in meters.
    pub attacker_position: [f64; 2],
    /// Tag on/off keying rate in bits/s.
    pub tag_bitrate: f64,
    /// Receiver SNR in dB; `f64::INFINITY` disables noise.
    #[serde(with = "snr_serde")]
    pub snr_db: f64,
    /// Std-dev of the multiplicative per-sample gain perturbation
    /// (0 = static scene).
    pub dynamic_fading_std: f64,
    /// Linear gain in [0,1] applied to the direct path (1 = clear LoS).
    pub direct_path_attenuation: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        let tag_count = 3;
        SceneConfig {
            carrier_frequency: 9.0e8,
            sample_rate: 1.0e6,
            tag_count,
            tag_positions: default_tag_ring(tag_count),
            ap_position: [0.0, 0.0],
            user_position: [0.0, 2.5],
            attacker_position: [0.55, 3.05],
            tag_bitrate: 1.0e4,
            snr_db: 20.0,
            dynamic_fading_std: 0.0,
            direct_path_attenuation: 1.0,
        }
    }
}

/// Radius of the default tag ring around the AP, in meters.
pub const DEFAULT_TAG_RADIUS: f64 = 0.15;

/// Place `count` tags on a ring of [`DEFAULT_TAG_RADIUS`] around the origin.
///
/// The angles are deliberately irregular so that no two tags sit mirror
/// symmetric about the AP-user axis, which would give them identical
/// path gains for an on-axis transmitter.
pub fn default_tag_ring(count: usize) -> Vec<[f64; 2]> {
    (0..count)
        .map(|k| {
            let angle = std::f64::consts::FRAC_PI_2
                + k as f64 * std::f64::consts::TAU / count.max(1) as f64
                + 0.15 * k as f64;
            [
                DEFAULT_TAG_RADIUS * angle.cos(),
                DEFAULT_TAG_RADIUS * angle.sin(),
            ]
        })
        .collect()
}

impl SceneConfig {
    /// Carrier wavelength in meters.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// Samples per tag bit.
    pub fn bit_period(&self) -> usize {
        (self.sample_rate / self.tag_bitrate).round() as usize
    }

    /// Check every structural invariant of the scene.
    pub fn validate(&self) -> Result<()> {
        let positive_finite = |v: f64| v.is_finite() && v > 0.0;
        if !positive_finite(self.carrier_frequency)
            || !positive_finite(self.sample_rate)
            || !positive_finite(self.tag_bitrate)
        {
            return Err(Error::invalid(
                "carrier_frequency, sample_rate and tag_bitrate must be positive and finite",
            ));
        }
        if self.snr_db.is_nan() {
            return Err(Error::invalid("snr_db must not be NaN"));
        }
        if !self.dynamic_fading_std.is_finite() {
            return Err(Error::invalid("dynamic_fading_std must be finite"));
        }
        let mut coords = vec![self.ap_position, self.user_position, self.attacker_position];
        coords.extend_from_slice(&self.tag_positions);
        if coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("scene positions must be finite"));
        }
        if self.tag_count == 0 {
            return Err(Error::invalid("tag_count must be at least 1"));
        }
        if self.tag_count != self.tag_positions.len() {
            return Err(Error::invalid(format!(
                "tag_count {} does not match {} tag positions",
                self.tag_count,
                self.tag_positions.len()
            )));
        }
        if self.sample_rate < 10.0 * self.tag_bitrate {
            return Err(Error::invalid(
                "sample_rate must be at least 10x tag_bitrate",
            ));
        }
        if !(0.0..=1.0).contains(&self.direct_path_attenuation) {
            return Err(Error::invalid(
                "direct_path_attenuation must lie in [0, 1]",
            ));
        }
        if self.dynamic_fading_std < 0.0 {
            return Err(Error::invalid("dynamic_fading_std must be non-negative"));
        }
        let mut all = vec![self.ap_position, self.user_position, self.attacker_position];
        all.extend_from_slice(&self.tag_positions);
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                if distance(all[i], all[j]) == 0.0 {
                    return Err(Error::invalid(
                        "all scene positions must be pairwise distinct",
                    ));
                }
            }
        }
        Ok(())
    }

    fn source_position(&self, source: Source) -> [f64; 2] {
        match source {
            Source::User | Source::Superposed => self.user_position,
            Source::Attacker => self.attacker_position,
        }
    }

    /// Per-tag reflected-path amplitude gains `1/(d1·d2)` for a transmitter
    /// at `pos`, indexed by tag.
    pub fn reflected_gains(&self, pos: [f64; 2]) -> Vec<f64> {
        self.tag_positions
            .iter()
            .map(|&tag| {
                let d1 = distance(pos, tag);
                let d2 = distance(tag, self.ap_position);
                1.0 / (d1 * d2)
            })
            .collect()
    }

    /// Direct-path amplitude gain (including the LoS attenuation knob) for a
    /// transmitter at `pos`.
    pub fn direct_gain(&self, pos: [f64; 2]) -> f64 {
        self.direct_path_attenuation / distance(pos, self.ap_position)
    }

    /// Complex direct-path coefficient (gain and propagation phase).
    pub fn direct_coefficient(&self, pos: [f64; 2]) -> Complex64 {
        let d = distance(pos, self.ap_position);
        let phase = -std::f64::consts::TAU * d / self.wavelength();
        Complex64::from_polar(self.direct_path_attenuation / d, phase)
    }

    /// Complex reflected-path coefficient through tag `k`.
    pub fn reflected_coefficient(&self, pos: [f64; 2], tag: usize) -> Complex64 {
        let d1 = distance(pos, self.tag_positions[tag]);
        let d2 = distance(self.tag_positions[tag], self.ap_position);
        let phase = -std::f64::consts::TAU * (d1 + d2) / self.wavelength();
        Complex64::from_polar(1.0 / (d1 * d2), phase)
    }
}

/// Euclidean distance between two 2-D points.
pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// JSON has no infinity literal, so a noise-free SNR round-trips as the
/// string "inf" instead of silently becoming null.
mod snr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        if value.is_finite() {
            serializer.serialize_f64(*value)
        } else if *value > 0.0 {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(v),
            Raw::Text(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!(
                    "snr_db must be a number or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

/// Activation plan for one message: which tag reflects when.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSchedule {
    /// Order in which tags activate; a permutation of `0..tag_count`.
    pub order: Vec<usize>,
    /// Samples each tag stays active.
    pub per_tag_duration: usize,
    /// Silent samples before the first and after the last tag slot.
    pub guard_gap: usize,
}

/// Default per-tag slot length in seconds.
pub const DEFAULT_PER_TAG_SECONDS: f64 = 0.010;
/// Default guard gap in seconds.
pub const DEFAULT_GUARD_SECONDS: f64 = 0.005;

impl TagSchedule {
    /// Schedule with the given activation order and slot geometry derived
    /// from the scene's sample rate.
    pub fn for_scene(scene: &SceneConfig, order: Vec<usize>) -> Self {
        TagSchedule {
            order,
            per_tag_duration: (DEFAULT_PER_TAG_SECONDS * scene.sample_rate).round() as usize,
            guard_gap: (DEFAULT_GUARD_SECONDS * scene.sample_rate).round() as usize,
        }
    }

    /// Total trace length implied by this schedule.
    pub fn total_samples(&self) -> usize {
        2 * self.guard_gap + self.order.len() * self.per_tag_duration
    }

    /// First sample index at which a tag may reflect.
    pub fn backscatter_start(&self) -> usize {
        self.guard_gap
    }

    /// Check the schedule against the scene it will drive.
    pub fn validate(&self, scene: &SceneConfig) -> Result<()> {
        if self.order.len() != scene.tag_count {
            return Err(Error::invalid(format!(
                "schedule covers {} tags but scene has {}",
                self.order.len(),
                scene.tag_count
            )));
        }
        let mut seen = vec![false; scene.tag_count];
        for &t in &self.order {
            if t >= scene.tag_count || seen[t] {
                return Err(Error::invalid(
                    "schedule order is not a permutation of the tag indices",
                ));
            }
            seen[t] = true;
        }
        if self.per_tag_duration < 2 * scene.bit_period() {
            return Err(Error::invalid(
                "per_tag_duration must span at least 2 tag-bit periods",
            ));
        }
        Ok(())
    }
}

/// Uniformly random tag activation order with default slot geometry.
///
/// The permutation is drawn by Fisher-Yates from a stream cipher RNG, so a
/// fixed `(tag_count, seed)` pair always yields the same schedule.
pub fn make_tag_schedule(tag_count: usize, seed: u64) -> Result<TagSchedule> {
    if tag_count == 0 {
        return Err(Error::domain("tag_count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..tag_count).collect();
    // Fisher-Yates
    for i in (1..tag_count).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    Ok(TagSchedule {
        order,
        per_tag_duration: (DEFAULT_PER_TAG_SECONDS * 1.0e6).round() as usize,
        guard_gap: (DEFAULT_GUARD_SECONDS * 1.0e6).round() as usize,
    })
}

/// Annotations describing what the simulator actually put into a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// First sample index at which any tag reflects.
    pub backscatter_start: usize,
    /// One past the last reflecting sample.
    pub backscatter_end: usize,
    /// Transmitter that produced the trace.
    pub source: Source,
    /// Tag activation order used.
    pub tag_order: Vec<usize>,
}

/// A received complex-baseband recording.
#[derive(Debug, Clone)]
pub struct Trace {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub truth: Option<GroundTruth>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Amplitude series `|x(i)|`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm()).collect()
    }

    /// Non-empty and finite everywhere.
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::domain("trace must be non-empty"));
        }
        if self
            .samples
            .iter()
            .any(|s| !s.re.is_finite() || !s.im.is_finite())
        {
            return Err(Error::domain("trace contains non-finite samples"));
        }
        Ok(())
    }
}

/// Coherence time `9λ / (16πv)` for a carrier at `carrier_frequency` and a
/// maximum transmitter velocity of `max_velocity` m/s.
pub fn coherence_time(carrier_frequency: f64, max_velocity: f64) -> Result<f64> {
    if carrier_frequency <= 0.0 || max_velocity <= 0.0 {
        return Err(Error::domain(
            "coherence_time requires positive frequency and velocity",
        ));
    }
    let wavelength = SPEED_OF_LIGHT / carrier_frequency;
    Ok(9.0 * wavelength / (16.0 * std::f64::consts::PI * max_velocity))
}

// Sub-stream labels so that user, attacker and receiver randomness stay
// independent and a superposed trace can reuse the exact per-source streams.
const STREAM_FADING_USER: u64 = 1;
const STREAM_FADING_ATTACKER: u64 = 2;
const STREAM_NOISE: u64 = 3;

fn substream(seed: u64, label: u64) -> ChaCha8Rng {
    // splitmix64 scramble keeps related (seed, label) pairs uncorrelated.
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Clean (noise-free) propagation of one transmitter through the scene.
///
/// `fading` perturbs the composite signal sample-wise when the scene is
/// dynamic. The global tag data pattern alternates 1,0,1,0,... from the start
/// of the backscatter region, independent of tag boundaries, so decoders see
/// an uninterrupted bit clock across the whole region.
fn propagate(
    scene: &SceneConfig,
    schedule: &TagSchedule,
    pos: [f64; 2],
    fading_rng: &mut ChaCha8Rng,
) -> (Vec<Complex64>, usize, usize) {
    let total = schedule.total_samples();
    let bit_period = scene.bit_period();
    let start = schedule.backscatter_start();
    let direct = scene.direct_coefficient(pos);
    let reflected: Vec<Complex64> = (0..scene.tag_count)
        .map(|k| scene.reflected_coefficient(pos, k))
        .collect();

    let fading = if scene.dynamic_fading_std > 0.0 {
        Some(Normal::new(0.0, scene.dynamic_fading_std).expect("validated std"))
    } else {
        None
    };

    let omega = std::f64::consts::TAU * CARRIER_OFFSET_FRACTION;
    let mut samples = Vec::with_capacity(total);
    let mut first_on = None;
    let mut last_on = 0usize;
    for n in 0..total {
        let mut coeff = direct;
        if n >= start && n < start + schedule.order.len() * schedule.per_tag_duration {
            let offset = n - start;
            let slot = offset / schedule.per_tag_duration;
            let bit_index = offset / bit_period;
            let tag_on = bit_index.is_multiple_of(2);
            if tag_on {
                coeff += reflected[schedule.order[slot]];
                if first_on.is_none() {
                    first_on = Some(n);
                }
                last_on = n;
            }
        }
        let carrier = Complex64::from_polar(1.0, omega * n as f64);
        let mut x = coeff * carrier;
        if let Some(dist) = &fading {
            x *= 1.0 + dist.sample(fading_rng);
        }
        samples.push(x);
    }
    let s = first_on.unwrap_or(start);
    let e = if first_on.is_some() { last_on + 1 } else { start };
    (samples, s, e)
}

/// Synthesize the received trace for one message.
///
/// The trace is the direct path from the chosen source plus, while a tag is
/// keyed on, that tag's reflected path, with AWGN at `scene.snr_db` added on
/// top. Identical `(scene, schedule, source, seed)` always produce the same
/// samples, and a superposed trace equals the sample-wise sum of the user and
/// attacker traces generated from the same seed when noise is off.
pub fn synthesize_trace(
    scene: &SceneConfig,
    schedule: &TagSchedule,
    source: Source,
    seed: u64,
) -> Result<Trace> {
    scene.validate()?;
    schedule.validate(scene)?;

    let (mut samples, s, e) = match source {
        Source::User | Source::Attacker => {
            let label = if source == Source::User {
                STREAM_FADING_USER
            } else {
                STREAM_FADING_ATTACKER
            };
            let mut rng = substream(seed, label);
            propagate(scene, schedule, scene.source_position(source), &mut rng)
        }
        Source::Superposed => {
            let mut rng_u = substream(seed, STREAM_FADING_USER);
            let (user, s, e) = propagate(scene, schedule, scene.user_position, &mut rng_u);
            let mut rng_a = substream(seed, STREAM_FADING_ATTACKER);
            let (attacker, _, _) =
                propagate(scene, schedule, scene.attacker_position, &mut rng_a);
            let sum = user
                .iter()
                .zip(attacker.iter())
                .map(|(u, a)| u + a)
                .collect();
            (sum, s, e)
        }
    };

    if scene.snr_db.is_finite() {
        let signal_power =
            samples.iter().map(|x| x.norm_sqr()).sum::<f64>() / samples.len() as f64;
        let noise_power = signal_power / 10f64.powf(scene.snr_db / 10.0);
        let per_dim = (noise_power / 2.0).sqrt();
        let normal = Normal::new(0.0, per_dim).expect("positive std");
        let mut rng = substream(seed, STREAM_NOISE);
        for x in samples.iter_mut() {
            *x += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }

    Ok(Trace {
        samples,
        sample_rate: scene.sample_rate,
        truth: Some(GroundTruth {
            backscatter_start: s,
            backscatter_end: e,
            source,
            tag_order: schedule.order.clone(),
        }),
    })
}
