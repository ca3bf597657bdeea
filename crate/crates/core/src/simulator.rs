//! Seeded seed-flow scenario generator.
//!
//! Seeds enter at the top of the frame at exponential intervals and move
//! down at constant velocity with Brownian lateral jitter. When two bodies
//! first touch, each may be deflected by a Gaussian velocity kick. A
//! fraction of seeds spawn stuck to their predecessor as a rigid clump.
//! Detections are derived from the visible ground-truth boxes: jittered,
//! dropped by a two-state miss process, merged into one union box when
//! boxes overlap above the cluster threshold, and mixed with low-confidence
//! clutter.
//!
//! Every random draw comes from a ChaCha stream derived from `rng_seed`,
//! one stream per concern, so changing a detection-noise knob never alters
//! the ground-truth kinematics.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{iou, BBox, Detection, DetectionStream, FrameDetections};
use crate::io::DetectionRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedSize {
    pub class_id: u32,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub rng_seed: u64,
    pub fps: f64,
    pub n_seeds: u32,
    pub frame_w: f64,
    pub frame_h: f64,
    pub spawn_interval_mean_s: f64,
    /// Mean downward speed, px/s.
    pub mean_speed: f64,
    /// Standard deviation of the per-seed downward speed, px/s.
    pub speed_std: f64,
    /// Lateral Brownian jitter, px/√s.
    pub lateral_jitter_std: f64,
    pub collision_deflect_prob: f64,
    /// Standard deviation of each velocity component kick, px/s.
    pub collision_deflect_std: f64,
    /// Boxes overlapping above this IoU are detected as one merged box.
    pub cluster_iou_threshold: f64,
    /// Probability that a seed spawns stuck to the previous seed.
    pub cluster_spawn_prob: f64,
    /// Long-run fraction of frames on which a seed goes undetected.
    pub p_miss: f64,
    /// Mean length of a miss burst, seconds. Zero gives independent misses.
    pub miss_burst_mean_s: f64,
    /// Expected false positives per frame.
    pub clutter_rate: f64,
    /// Standard deviation of detection box jitter, px.
    pub box_jitter_std: f64,
    pub base_confidence: f64,
    pub confidence_noise_std: f64,
    /// Confidence lost per unit of occluded area fraction.
    pub occlusion_penalty: f64,
    /// Probability that a detection is degraded to a low confidence.
    pub low_conf_prob: f64,
    pub seed_sizes: Vec<SeedSize>,
    /// Dimension of per-seed appearance embeddings; 0 disables them.
    pub embedding_dim: usize,
    pub embedding_noise_std: f64,
}

impl Default for SimScenario {
    /// The frozen noisy profile used by the acceptance suite.
    fn default() -> Self {
        SimScenario {
            rng_seed: 7,
            fps: 60.0,
            n_seeds: 250,
            frame_w: 720.0,
            frame_h: 1280.0,
            spawn_interval_mean_s: 0.12,
            mean_speed: 220.0,
            speed_std: 50.0,
            lateral_jitter_std: 4.0,
            collision_deflect_prob: 0.5,
            collision_deflect_std: 60.0,
            cluster_iou_threshold: 0.3,
            cluster_spawn_prob: 0.04,
            p_miss: 0.05,
            miss_burst_mean_s: 0.05,
            clutter_rate: 0.2,
            box_jitter_std: 0.8,
            base_confidence: 0.85,
            confidence_noise_std: 0.05,
            occlusion_penalty: 0.5,
            low_conf_prob: 0.05,
            seed_sizes: vec![SeedSize {
                class_id: 0,
                width: 26.0,
                height: 24.0,
            }],
            embedding_dim: 0,
            embedding_noise_std: 0.1,
        }
    }
}

impl SimScenario {
    /// Same kinematics as the default, with every detection corruption off:
    /// no misses, no merging, no clutter, no jitter, full confidence.
    pub fn clean() -> Self {
        SimScenario::default().without_corruption()
    }

    pub fn without_corruption(mut self) -> Self {
        self.cluster_iou_threshold = 1.0;
        self.p_miss = 0.0;
        self.clutter_rate = 0.0;
        self.box_jitter_std = 0.0;
        self.base_confidence = 1.0;
        self.confidence_noise_std = 0.0;
        self.occlusion_penalty = 0.0;
        self.low_conf_prob = 0.0;
        self
    }

    /// Long detector dropouts that fragment tracks.
    pub fn fragmentation() -> Self {
        SimScenario {
            p_miss: 0.3,
            miss_burst_mean_s: 0.4,
            ..SimScenario::default()
        }
    }

    /// Many partially occluded, low-confidence detections.
    pub fn occlusion_heavy() -> Self {
        SimScenario {
            low_conf_prob: 0.3,
            occlusion_penalty: 0.8,
            cluster_spawn_prob: 0.08,
            ..SimScenario::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_fps(mut self, fps: f64) -> Self {
        self.fps = fps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be positive, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be non-negative, got {v}")))
            }
        };
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(name, format!("must lie in [0, 1], got {v}")))
            }
        };
        positive("fps", self.fps)?;
        if self.n_seeds == 0 {
            return Err(Error::config("n_seeds", "must be at least 1"));
        }
        positive("frame_w", self.frame_w)?;
        positive("frame_h", self.frame_h)?;
        positive("spawn_interval_mean_s", self.spawn_interval_mean_s)?;
        positive("mean_speed", self.mean_speed)?;
        non_negative("speed_std", self.speed_std)?;
        non_negative("lateral_jitter_std", self.lateral_jitter_std)?;
        prob("collision_deflect_prob", self.collision_deflect_prob)?;
        non_negative("collision_deflect_std", self.collision_deflect_std)?;
        prob("cluster_iou_threshold", self.cluster_iou_threshold)?;
        prob("cluster_spawn_prob", self.cluster_spawn_prob)?;
        prob("p_miss", self.p_miss)?;
        if self.p_miss >= 1.0 {
            return Err(Error::config("p_miss", "must be below 1"));
        }
        non_negative("miss_burst_mean_s", self.miss_burst_mean_s)?;
        non_negative("clutter_rate", self.clutter_rate)?;
        non_negative("box_jitter_std", self.box_jitter_std)?;
        prob("base_confidence", self.base_confidence)?;
        non_negative("confidence_noise_std", self.confidence_noise_std)?;
        non_negative("occlusion_penalty", self.occlusion_penalty)?;
        prob("low_conf_prob", self.low_conf_prob)?;
        non_negative("embedding_noise_std", self.embedding_noise_std)?;
        if self.seed_sizes.is_empty() {
            return Err(Error::config("seed_sizes", "at least one class size is required"));
        }
        for s in &self.seed_sizes {
            positive("seed_sizes", s.width)?;
            positive("seed_sizes", s.height)?;
            if s.width >= self.frame_w || s.height >= self.frame_h {
                return Err(Error::config("seed_sizes", "seeds must fit inside the frame"));
            }
        }
        Ok(())
    }
}

/// One seed's visible trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedTrajectory {
    /// 1-based id, as written to ground-truth files.
    pub id: u64,
    pub class_id: u32,
    pub first_frame: u64,
    /// True box on each frame from `first_frame` while fully inside the frame.
    pub boxes: Vec<BBox>,
}

impl SeedTrajectory {
    pub fn box_at(&self, frame: u64) -> Option<&BBox> {
        frame
            .checked_sub(self.first_frame)
            .and_then(|k| self.boxes.get(k as usize))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub fps: f64,
    pub n_frames: u64,
    pub true_count: u64,
    pub seeds: Vec<SeedTrajectory>,
}

impl GroundTruth {
    /// Ground-truth file records: real ids, confidence 1.
    pub fn records(&self) -> Vec<DetectionRecord> {
        let mut out: Vec<DetectionRecord> = self
            .seeds
            .iter()
            .flat_map(|s| {
                s.boxes.iter().enumerate().map(move |(k, b)| DetectionRecord {
                    frame: s.first_frame + k as u64 + 1,
                    track_id: s.id as i64,
                    bbox: *b,
                    confidence: 1.0,
                    class_id: s.class_id,
                })
            })
            .collect();
        out.sort_by_key(|r| (r.frame, r.track_id));
        out
    }

    /// Visible seeds on a frame, in id order.
    pub fn visible(&self, frame: u64) -> Vec<(&SeedTrajectory, BBox)> {
        self.seeds
            .iter()
            .filter_map(|s| s.box_at(frame).map(|b| (s, *b)))
            .collect()
    }
}

/// Perfect-detector stream: every true box at confidence 1, no clutter.
pub fn replay(gt: &GroundTruth, fps: f64) -> DetectionStream {
    let mut stream = DetectionStream::new(fps);
    stream.frames = (0..gt.n_frames)
        .map(|f| {
            let dets = gt
                .visible(f)
                .into_iter()
                .map(|(s, b)| Detection::new(b, 1.0, s.class_id).expect("confidence 1 is valid"))
                .collect();
            FrameDetections::new(f, fps, dets)
        })
        .collect();
    stream
}

mod streams {
    pub const SPAWN: u64 = 1;
    pub const MOTION: u64 = 2;
    pub const COLLISION: u64 = 3;
    pub const DETECTION: u64 = 4;
    pub const MISS: u64 = 5;
    pub const CLUTTER: u64 = 6;
    pub const EMBEDDING: u64 = 7;
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

struct Seed {
    id: u64,
    class_id: u32,
    body: usize,
    spawn_frame: u64,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
    active: bool,
    embedding: Option<Vec<f64>>,
    missing: bool,
}

impl Seed {
    fn bbox(&self) -> BBox {
        BBox::new(self.x, self.y, self.w, self.h).expect("seed sizes are validated")
    }
}

struct Body {
    vx: f64,
    vy: f64,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gauss(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn to_embedding(v: &[f64]) -> Vec<f32> {
    v.iter().map(|x| *x as f32).collect()
}

/// Runs a scenario, returning the ground truth and the corrupted detection stream.
pub fn simulate(sc: &SimScenario) -> Result<(GroundTruth, DetectionStream)> {
    sc.validate()?;
    let dt = 1.0 / sc.fps;
    let mut spawn_rng = rng_for(sc.rng_seed, streams::SPAWN);
    let mut motion_rng = rng_for(sc.rng_seed, streams::MOTION);
    let mut collision_rng = rng_for(sc.rng_seed, streams::COLLISION);
    let mut det_rng = rng_for(sc.rng_seed, streams::DETECTION);
    let mut miss_rng = rng_for(sc.rng_seed, streams::MISS);
    let mut clutter_rng = rng_for(sc.rng_seed, streams::CLUTTER);
    let mut emb_rng = rng_for(sc.rng_seed, streams::EMBEDDING);

    // Spawn plan, independent of frame rate.
    let interval = Exp::new(1.0 / sc.spawn_interval_mean_s).expect("positive rate");
    let mut seeds: Vec<Seed> = Vec::with_capacity(sc.n_seeds as usize);
    let mut bodies: Vec<Body> = Vec::new();
    let mut t = 0.0f64;
    for k in 0..sc.n_seeds as usize {
        let size = sc.seed_sizes[spawn_rng.random_range(0..sc.seed_sizes.len())];
        let clump = spawn_rng.random::<f64>() < sc.cluster_spawn_prob;
        let gap = interval.sample(&mut spawn_rng);
        let x_frac = spawn_rng.random::<f64>();
        let offset_frac = spawn_rng.random_range(0.3..0.5);
        let speed = sc.mean_speed + sc.speed_std * gauss(&mut spawn_rng);
        let embedding = (sc.embedding_dim > 0).then(|| random_unit(&mut emb_rng, sc.embedding_dim));

        let (body, x, spawn_t) = match seeds.last() {
            Some(prev) if clump && k > 0 && prev.w + size.width * (1.0 + offset_frac) < sc.frame_w => {
                // stuck to the right or left side of the previous seed
                let dx = offset_frac * size.width.min(prev.w);
                let right = prev.x + dx;
                let x = if right + size.width <= sc.frame_w {
                    right
                } else {
                    prev.x - dx
                };
                (prev.body, x.clamp(0.0, sc.frame_w - size.width), t)
            }
            _ => {
                t += gap;
                bodies.push(Body {
                    vx: 0.0,
                    vy: speed.max(0.2 * sc.mean_speed),
                });
                (bodies.len() - 1, x_frac * (sc.frame_w - size.width), t)
            }
        };
        seeds.push(Seed {
            id: k as u64 + 1,
            class_id: size.class_id,
            body,
            spawn_frame: (spawn_t * sc.fps).ceil() as u64,
            x,
            y: 0.0,
            w: size.width,
            h: size.height,
            active: false,
            embedding,
            missing: false,
        });
    }
    // A clump member spawns on the same frame as its body's first seed.
    for i in 1..seeds.len() {
        if seeds[i].body == seeds[i - 1].body {
            seeds[i].spawn_frame = seeds[i - 1].spawn_frame;
        }
    }

    let (p_enter, p_exit) = miss_transition(sc.p_miss, sc.miss_burst_mean_s * sc.fps);
    let box_noise = Normal::new(0.0, sc.box_jitter_std).expect("validated std");
    let clutter = (sc.clutter_rate > 0.0).then(|| Poisson::new(sc.clutter_rate).expect("positive rate"));

    let mut trajectories: Vec<SeedTrajectory> = seeds
        .iter()
        .map(|s| SeedTrajectory {
            id: s.id,
            class_id: s.class_id,
            first_frame: s.spawn_frame,
            boxes: Vec::new(),
        })
        .collect();
    let mut stream = DetectionStream::new(sc.fps);
    let mut in_contact: HashSet<(usize, usize)> = HashSet::new();
    let mut next_spawn = 0usize;
    let mut frame = 0u64;

    loop {
        while next_spawn < seeds.len() && seeds[next_spawn].spawn_frame <= frame {
            seeds[next_spawn].active = true;
            next_spawn += 1;
        }
        let active: Vec<usize> = (0..seeds.len()).filter(|&i| seeds[i].active).collect();
        if active.is_empty() && next_spawn == seeds.len() {
            break;
        }

        for &i in &active {
            trajectories[i].boxes.push(seeds[i].bbox());
        }

        // Miss process: one draw per active seed per frame, whatever p_miss is.
        for &i in &active {
            let u = miss_rng.random::<f64>();
            let s = &mut seeds[i];
            s.missing = if s.missing { u >= p_exit } else { u < p_enter };
        }

        let dets = detections_for_frame(
            sc,
            &seeds,
            &active,
            &mut det_rng,
            &box_noise,
            clutter.as_ref(),
            &mut clutter_rng,
            &mut emb_rng,
        );
        stream.frames.push(FrameDetections::new(frame, sc.fps, dets));

        // Contact onsets between distinct bodies deflect both bodies.
        let mut touching = HashSet::new();
        for (a, &i) in active.iter().enumerate() {
            for &j in &active[a + 1..] {
                if seeds[i].body != seeds[j].body && seeds[i].bbox().intersection_area(&seeds[j].bbox()) > 0.0 {
                    touching.insert((i, j));
                }
            }
        }
        let mut onsets: Vec<(usize, usize)> = touching.difference(&in_contact).copied().collect();
        onsets.sort_unstable();
        for (i, j) in onsets {
            for b in [seeds[i].body, seeds[j].body] {
                let kick = collision_rng.random::<f64>() < sc.collision_deflect_prob;
                let dvx = sc.collision_deflect_std * gauss(&mut collision_rng);
                let dvy = sc.collision_deflect_std * gauss(&mut collision_rng);
                if kick {
                    bodies[b].vx += dvx;
                    bodies[b].vy = (bodies[b].vy + dvy).max(0.2 * sc.mean_speed);
                }
            }
        }
        in_contact = touching;

        // Advance each body once; members move rigidly together.
        let mut moved = vec![false; bodies.len()];
        for &i in &active {
            let b = seeds[i].body;
            if moved[b] {
                continue;
            }
            moved[b] = true;
            let jitter = sc.lateral_jitter_std * dt.sqrt() * gauss(&mut motion_rng);
            let members: Vec<usize> = active.iter().copied().filter(|&k| seeds[k].body == b).collect();
            let mut dx = bodies[b].vx * dt + jitter;
            let dy = bodies[b].vy * dt;
            let lo = members.iter().map(|&k| seeds[k].x).fold(f64::INFINITY, f64::min);
            let hi = members.iter().map(|&k| seeds[k].x + seeds[k].w).fold(f64::NEG_INFINITY, f64::max);
            // rails: bounce off the side walls
            if lo + dx < 0.0 {
                dx = -lo;
                bodies[b].vx = bodies[b].vx.abs();
            } else if hi + dx > sc.frame_w {
                dx = sc.frame_w - hi;
                bodies[b].vx = -bodies[b].vx.abs();
            }
            for k in members {
                seeds[k].x += dx;
                seeds[k].y += dy;
            }
        }
        for &i in &active {
            if seeds[i].y + seeds[i].h > sc.frame_h {
                seeds[i].active = false;
            }
        }
        frame += 1;
    }

    let gt = GroundTruth {
        fps: sc.fps,
        n_frames: frame,
        true_count: u64::from(sc.n_seeds),
        seeds: trajectories,
    };
    Ok((gt, stream))
}

/// Entry and exit probabilities of the two-state miss chain with stationary
/// miss fraction `p` and mean burst length `burst_frames`.
fn miss_transition(p: f64, burst_frames: f64) -> (f64, f64) {
    if p <= 0.0 {
        return (0.0, 1.0);
    }
    if burst_frames <= 1.0 {
        // independent misses: enter with p, always leave
        return (p, 1.0 - p);
    }
    let exit = 1.0 / burst_frames;
    let enter = (p / (1.0 - p) * exit).min(1.0);
    (enter, exit)
}

#[allow(clippy::too_many_arguments)]
fn detections_for_frame(
    sc: &SimScenario,
    seeds: &[Seed],
    active: &[usize],
    det_rng: &mut ChaCha8Rng,
    box_noise: &Normal<f64>,
    clutter: Option<&Poisson<f64>>,
    clutter_rng: &mut ChaCha8Rng,
    emb_rng: &mut ChaCha8Rng,
) -> Vec<Detection> {
    let boxes: Vec<BBox> = active.iter().map(|&i| seeds[i].bbox()).collect();
    let n = boxes.len();

    // Connected components of the "IoU above threshold" graph.
    let mut group: Vec<usize> = (0..n).collect();
    fn root(g: &mut [usize], mut i: usize) -> usize {
        while g[i] != i {
            g[i] = g[g[i]];
            i = g[i];
        }
        i
    }
    if sc.cluster_iou_threshold < 1.0 {
        for a in 0..n {
            for b in a + 1..n {
                if iou(&boxes[a], &boxes[b]) > sc.cluster_iou_threshold {
                    let (ra, rb) = (root(&mut group, a), root(&mut group, b));
                    group[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in 0..n {
        let r = root(&mut group, a);
        members[r].push(a);
    }

    let mut out = Vec::new();
    for m in members.into_iter().filter(|m| !m.is_empty()) {
        // Noise draws happen for every group so the stream of draws does not
        // depend on which detections are dropped.
        let jitter: [f64; 4] = std::array::from_fn(|_| box_noise.sample(det_rng));
        let conf_noise = sc.confidence_noise_std * gauss(det_rng);
        let degrade = det_rng.random::<f64>() < sc.low_conf_prob;
        let degraded_conf = det_rng.random_range(0.15..0.55);
        let emb_noise: Vec<f64> = (0..sc.embedding_dim).map(|_| gauss(emb_rng)).collect();

        if m.iter().all(|&a| seeds[active[a]].missing) {
            continue;
        }
        let union = m[1..].iter().fold(boxes[m[0]], |u, &a| u.union_box(&boxes[a]));
        let occluded = m
            .iter()
            .map(|&a| {
                (0..n)
                    .filter(|b| !m.contains(b))
                    .map(|b| boxes[a].intersection_area(&boxes[b]) / boxes[a].area())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let w = (union.width() + jitter[2]).max(1.0);
        let h = (union.height() + jitter[3]).max(1.0);
        let (cx, cy) = union.center();
        let bbox = BBox::new(cx + jitter[0] - w / 2.0, cy + jitter[1] - h / 2.0, w, h)
            .expect("jittered box is finite and positive");
        let confidence = if degrade {
            degraded_conf
        } else {
            sc.base_confidence - sc.occlusion_penalty * occluded.min(1.0) + conf_noise
        }
        .clamp(0.0, 1.0);
        let first = &seeds[active[m[0]]];
        let mut det = Detection::new(bbox, confidence, first.class_id).expect("clamped confidence");
        if sc.embedding_dim > 0 {
            let mut v = vec![0.0f64; sc.embedding_dim];
            for &a in &m {
                for (acc, x) in v.iter_mut().zip(seeds[active[a]].embedding.as_deref().unwrap_or(&[])) {
                    *acc += x;
                }
            }
            for (acc, e) in v.iter_mut().zip(&emb_noise) {
                *acc += sc.embedding_noise_std * e;
            }
            if let Ok(d) = det.clone().with_embedding(to_embedding(&v)) {
                det = d;
            }
        }
        out.push(det);
    }

    if let Some(dist) = clutter {
        let k = dist.sample(clutter_rng) as usize;
        let size = sc.seed_sizes[0];
        for _ in 0..k {
            let x = clutter_rng.random_range(0.0..sc.frame_w - size.width);
            let y = clutter_rng.random_range(0.0..sc.frame_h - size.height);
            let conf = clutter_rng.random_range(0.1..0.5);
            let mut det = Detection::new(
                BBox::new(x, y, size.width, size.height).expect("valid size"),
                conf,
                size.class_id,
            )
            .expect("confidence in range");
            if sc.embedding_dim > 0 {
                let e = random_unit(clutter_rng, sc.embedding_dim);
                det = det.with_embedding(to_embedding(&e)).expect("unit vector");
            }
            out.push(det);
        }
    }
    out
}
