//! Effective run configuration shared by every command.
//!
//! A [`RunConfig`] is built from defaults, then a `key = value` file, then
//! individual overrides. [`RunConfig::echo`] prints every field in the same
//! syntax, so an echoed config can be loaded back to reproduce a run.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dataset::{Background, DatasetSpec};
use crate::error::{Error, Result};
use crate::geometry::RoILine;
use crate::io::kv;
use crate::simulator::{SeedSize, SimScenario};
use crate::tracking::TrackerConfig;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    /// Also supplies the frame rate and frame size used when tracking a
    /// detection file.
    pub sim: SimScenario,
    pub dataset: DatasetSpec,
    pub line: RoILine,
    /// Used instead of the solid dataset background when set.
    pub background_image: Option<PathBuf>,
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got {value:?}"))),
    }
}

fn parse_pair<T: FromStr>(key: &str, value: &str, sep: char) -> Result<(T, T)> {
    let (a, b) = value
        .split_once(sep)
        .ok_or_else(|| Error::config(key, format!("expected A{sep}B, got {value:?}")))?;
    Ok((parse_num(key, a.trim())?, parse_num(key, b.trim())?))
}

/// `class:WxH` entries separated by commas, e.g. `0:26x24,1:30x18`.
fn parse_seed_sizes(key: &str, value: &str) -> Result<Vec<SeedSize>> {
    value
        .split(',')
        .map(|item| {
            let (class, dims) = item
                .split_once(':')
                .ok_or_else(|| Error::config(key, format!("expected class:WxH, got {item:?}")))?;
            let (width, height) = parse_pair(key, dims, 'x')?;
            Ok(SeedSize {
                class_id: parse_num(key, class.trim())?,
                width,
                height,
            })
        })
        .collect()
}

fn join<T: Display>(items: impl IntoIterator<Item = T>, sep: &str) -> String {
    items.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(sep)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.tracker;
        let s = &mut self.sim;
        let d = &mut self.dataset;
        match key {
            "algorithm" => t.algorithm = value.parse()?,
            "tau_high" => t.tau_high = parse_num(key, value)?,
            "tau_low" => t.tau_low = parse_num(key, value)?,
            "iou_match_threshold" => t.iou_match_threshold = parse_num(key, value)?,
            "rebirth_buffer_frames" => t.rebirth_buffer_frames = parse_num(key, value)?,
            "ema_alpha" => t.ema_alpha = parse_num(key, value)?,
            "appearance_weight" => t.appearance_weight = parse_num(key, value)?,
            "appearance_gate" => t.appearance_gate = parse_num(key, value)?,
            "mahalanobis_gate" => t.mahalanobis_gate = parse_num(key, value)?,
            "min_hits_to_confirm" => t.min_hits_to_confirm = parse_num(key, value)?,
            "detection_confidence_floor" => t.detection_confidence_floor = parse_num(key, value)?,
            "std_weight_position" => t.noise.std_weight_position = parse_num(key, value)?,
            "std_weight_velocity" => t.noise.std_weight_velocity = parse_num(key, value)?,
            "nsa_enabled" => t.noise.nsa_enabled = parse_bool(key, value)?,

            "line_position" => self.line = RoILine::new(parse_num(key, value)?)?,

            "rng_seed" => {
                s.rng_seed = parse_num(key, value)?;
                d.rng_seed = s.rng_seed;
            }
            "fps" => s.fps = parse_num(key, value)?,
            "n_seeds" => s.n_seeds = parse_num(key, value)?,
            "frame_w" => s.frame_w = parse_num(key, value)?,
            "frame_h" => s.frame_h = parse_num(key, value)?,
            "spawn_interval_mean_s" => s.spawn_interval_mean_s = parse_num(key, value)?,
            "mean_speed" => s.mean_speed = parse_num(key, value)?,
            "speed_std" => s.speed_std = parse_num(key, value)?,
            "lateral_jitter_std" => s.lateral_jitter_std = parse_num(key, value)?,
            "collision_deflect_prob" => s.collision_deflect_prob = parse_num(key, value)?,
            "collision_deflect_std" => s.collision_deflect_std = parse_num(key, value)?,
            "cluster_iou_threshold" => s.cluster_iou_threshold = parse_num(key, value)?,
            "cluster_spawn_prob" => s.cluster_spawn_prob = parse_num(key, value)?,
            "p_miss" => s.p_miss = parse_num(key, value)?,
            "miss_burst_mean_s" => s.miss_burst_mean_s = parse_num(key, value)?,
            "clutter_rate" => s.clutter_rate = parse_num(key, value)?,
            "box_jitter_std" => s.box_jitter_std = parse_num(key, value)?,
            "base_confidence" => s.base_confidence = parse_num(key, value)?,
            "confidence_noise_std" => s.confidence_noise_std = parse_num(key, value)?,
            "occlusion_penalty" => s.occlusion_penalty = parse_num(key, value)?,
            "low_conf_prob" => s.low_conf_prob = parse_num(key, value)?,
            "seed_sizes" => s.seed_sizes = parse_seed_sizes(key, value)?,
            "embedding_dim" => s.embedding_dim = parse_num(key, value)?,
            "embedding_noise_std" => s.embedding_noise_std = parse_num(key, value)?,

            "n_images" => d.n_images = parse_num(key, value)?,
            "image_size" => (d.image_w, d.image_h) = parse_pair(key, value, 'x')?,
            "kernels_per_image" => (d.kernels_min, d.kernels_max) = parse_pair(key, value, '-')?,
            "max_overlap_frac" => d.max_overlap_frac = parse_num(key, value)?,
            "flip_prob" => d.flip_prob = parse_num(key, value)?,
            "noise_sigma" => d.noise_sigma = parse_num(key, value)?,
            "train_val_split" => d.train_val_split = parse_num(key, value)?,
            "classes" => {
                d.classes = value
                    .split(',')
                    .map(|c| parse_num(key, c.trim()))
                    .collect::<Result<_>>()?
            }
            "background_color" => {
                let parts: Vec<u8> = value
                    .split(',')
                    .map(|c| parse_num(key, c.trim()))
                    .collect::<Result<_>>()?;
                let rgb: [u8; 3] = parts
                    .try_into()
                    .map_err(|_| Error::config(key, "expected R,G,B"))?;
                d.background = Background::Solid(rgb);
            }
            "background_image" => {
                self.background_image = (!value.is_empty()).then(|| PathBuf::from(value));
            }
            _ => return Err(Error::config(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Applies every entry of a `key = value` file. Errors carry the line.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        for e in kv::read(path)? {
            self.set(&e.key, &e.value).map_err(|err| match err {
                Error::InvalidConfig { field, reason } => Error::InvalidConfig {
                    field,
                    reason: format!("{reason} ({}:{})", path.display(), e.line),
                },
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.tracker.validate()?;
        self.sim.validate()?;
        self.dataset.validate()
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.tracker;
        let s = &self.sim;
        let d = &self.dataset;
        let background_color = match &d.background {
            Background::Solid(c) => join(c, ","),
            Background::Raster(_) => String::new(),
        };
        let mut out = vec![
            ("algorithm", t.algorithm.to_string()),
            ("tau_high", t.tau_high.to_string()),
            ("tau_low", t.tau_low.to_string()),
            ("iou_match_threshold", t.iou_match_threshold.to_string()),
            ("rebirth_buffer_frames", t.rebirth_buffer_frames.to_string()),
            ("ema_alpha", t.ema_alpha.to_string()),
            ("appearance_weight", t.appearance_weight.to_string()),
            ("appearance_gate", t.appearance_gate.to_string()),
            ("mahalanobis_gate", t.mahalanobis_gate.to_string()),
            ("min_hits_to_confirm", t.min_hits_to_confirm.to_string()),
            ("detection_confidence_floor", t.detection_confidence_floor.to_string()),
            ("std_weight_position", t.noise.std_weight_position.to_string()),
            ("std_weight_velocity", t.noise.std_weight_velocity.to_string()),
            ("nsa_enabled", t.noise.nsa_enabled.to_string()),
            ("line_position", self.line.position_norm().to_string()),
            ("rng_seed", s.rng_seed.to_string()),
            ("fps", s.fps.to_string()),
            ("n_seeds", s.n_seeds.to_string()),
            ("frame_w", s.frame_w.to_string()),
            ("frame_h", s.frame_h.to_string()),
            ("spawn_interval_mean_s", s.spawn_interval_mean_s.to_string()),
            ("mean_speed", s.mean_speed.to_string()),
            ("speed_std", s.speed_std.to_string()),
            ("lateral_jitter_std", s.lateral_jitter_std.to_string()),
            ("collision_deflect_prob", s.collision_deflect_prob.to_string()),
            ("collision_deflect_std", s.collision_deflect_std.to_string()),
            ("cluster_iou_threshold", s.cluster_iou_threshold.to_string()),
            ("cluster_spawn_prob", s.cluster_spawn_prob.to_string()),
            ("p_miss", s.p_miss.to_string()),
            ("miss_burst_mean_s", s.miss_burst_mean_s.to_string()),
            ("clutter_rate", s.clutter_rate.to_string()),
            ("box_jitter_std", s.box_jitter_std.to_string()),
            ("base_confidence", s.base_confidence.to_string()),
            ("confidence_noise_std", s.confidence_noise_std.to_string()),
            ("occlusion_penalty", s.occlusion_penalty.to_string()),
            ("low_conf_prob", s.low_conf_prob.to_string()),
            (
                "seed_sizes",
                join(
                    s.seed_sizes
                        .iter()
                        .map(|z| format!("{}:{}x{}", z.class_id, z.width, z.height)),
                    ",",
                ),
            ),
            ("embedding_dim", s.embedding_dim.to_string()),
            ("embedding_noise_std", s.embedding_noise_std.to_string()),
            ("n_images", d.n_images.to_string()),
            ("image_size", format!("{}x{}", d.image_w, d.image_h)),
            ("kernels_per_image", format!("{}-{}", d.kernels_min, d.kernels_max)),
            ("max_overlap_frac", d.max_overlap_frac.to_string()),
            ("flip_prob", d.flip_prob.to_string()),
            ("noise_sigma", d.noise_sigma.to_string()),
            ("train_val_split", d.train_val_split.to_string()),
            ("classes", join(&d.classes, ",")),
        ];
        if !background_color.is_empty() {
            out.push(("background_color", background_color));
        }
        out.push((
            "background_image",
            self.background_image
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        ));
        out
    }

    /// The full effective configuration as loadable `key = value` lines.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        }
        s
    }
}
