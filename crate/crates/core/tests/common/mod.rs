//! Independent oracles and scenario helpers shared by the integration tests.

#![allow(dead_code, clippy::needless_range_loop)]

use seedcount::counting::CountReport;
use seedcount::geometry::RoILine;
use seedcount::simulator::{self, SimScenario};
use seedcount::tracking::{Algorithm, TrackerConfig};
use seedcount::geometry::{Detection, FrameDetections};
use seedcount::{pipeline, BBox, DetectionStream};

pub type Dense = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> Dense {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn diag(v: &[f64]) -> Dense {
    let mut m = zeros(v.len(), v.len());
    for (i, x) in v.iter().enumerate() {
        m[i][i] = *x;
    }
    m
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            out[i][j] = (0..k).map(|t| a[i][t] * b[t][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Dense) -> Dense {
    let mut out = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

pub fn add(a: &Dense, b: &Dense, sign: f64) -> Dense {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + sign * q).collect())
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p != 0.0, "singular matrix in oracle");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn frobenius(a: &Dense) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Textbook constant-velocity filter over `[cx, cy, a, h, vcx, vcy, va, vh]`.
#[derive(Debug, Clone)]
pub struct OracleFilter {
    pub mean: Vec<f64>,
    pub cov: Dense,
    pub w_pos: f64,
    pub w_vel: f64,
}

impl OracleFilter {
    pub fn initiate(z: [f64; 4], w_pos: f64, w_vel: f64) -> Self {
        let h = z[3];
        let sd = [
            2.0 * w_pos * h,
            2.0 * w_pos * h,
            1e-2,
            2.0 * w_pos * h,
            10.0 * w_vel * h,
            10.0 * w_vel * h,
            1e-5,
            10.0 * w_vel * h,
        ];
        let mut mean = z.to_vec();
        mean.extend([0.0; 4]);
        OracleFilter {
            mean,
            cov: diag(&sd.map(|s| s * s)),
            w_pos,
            w_vel,
        }
    }

    fn transition() -> Dense {
        let mut f = eye(8);
        for i in 0..4 {
            f[i][i + 4] = 1.0;
        }
        f
    }

    fn projection() -> Dense {
        let mut h = zeros(4, 8);
        for i in 0..4 {
            h[i][i] = 1.0;
        }
        h
    }

    pub fn predict(&mut self) {
        let h = self.mean[3];
        let (p, v) = (self.w_pos * h, self.w_vel * h);
        let q = diag(&[p, p, 1e-2, p, v, v, 1e-5, v].map(|s| s * s));
        let f = Self::transition();
        let m: Dense = self.mean.iter().map(|x| vec![*x]).collect();
        self.mean = matmul(&f, &m).into_iter().map(|r| r[0]).collect();
        self.cov = add(&matmul(&matmul(&f, &self.cov), &transpose(&f)), &q, 1.0);
    }

    pub fn update(&mut self, z: [f64; 4], confidence: f64, nsa: bool) {
        let h = self.mean[3];
        let p = self.w_pos * h;
        let scale = if nsa { 1.0 - confidence } else { 1.0 };
        let r = diag(&[p, p, 1e-1, p].map(|s| s * s * scale));
        let hm = Self::projection();
        let s = add(&matmul(&matmul(&hm, &self.cov), &transpose(&hm)), &r, 1.0);
        let k = matmul(&matmul(&self.cov, &transpose(&hm)), &inverse(&s));
        let innov: Dense = (0..4).map(|i| vec![z[i] - self.mean[i]]).collect();
        let dm = matmul(&k, &innov);
        for i in 0..8 {
            self.mean[i] += dm[i][0];
        }
        let ikh = add(&eye(8), &matmul(&k, &hm), -1.0);
        let cov = matmul(&ikh, &self.cov);
        self.cov = add(&cov, &transpose(&cov), 1.0)
            .into_iter()
            .map(|r| r.into_iter().map(|v| v * 0.5).collect())
            .collect();
    }
}

/// Exhaustive search over partial matchings avoiding infinite cells:
/// maximum cardinality first, then minimum total cost.
pub fn brute_force_assignment(costs: &[Vec<f64>]) -> (usize, f64) {
    fn rec(costs: &[Vec<f64>], row: usize, used: &mut Vec<bool>, card: usize, cost: f64, best: &mut (usize, f64)) {
        if row == costs.len() {
            if card > best.0 || (card == best.0 && cost < best.1) {
                *best = (card, cost);
            }
            return;
        }
        rec(costs, row + 1, used, card, cost, best);
        for c in 0..used.len() {
            let v = costs[row][c];
            if !used[c] && v.is_finite() {
                used[c] = true;
                rec(costs, row + 1, used, card + 1, cost + v, best);
                used[c] = false;
            }
        }
    }
    let cols = costs.first().map_or(0, Vec::len);
    let mut best = (0, 0.0);
    rec(costs, 0, &mut vec![false; cols], 0, 0.0, &mut best);
    best
}

pub fn tracker_config(algorithm: Algorithm) -> TrackerConfig {
    TrackerConfig {
        algorithm,
        ..TrackerConfig::default()
    }
}

pub fn count_stream(stream: &DetectionStream, cfg: &TrackerConfig, frame_h: f64, actual: i64) -> CountReport {
    pipeline::run(stream, cfg, RoILine::default(), frame_h, Some(actual))
        .expect("pipeline run")
        .report
}

pub fn simulate_and_count(sc: &SimScenario, cfg: &TrackerConfig) -> CountReport {
    let (gt, stream) = simulator::simulate(sc).expect("valid scenario");
    count_stream(&stream, cfg, sc.frame_h, gt.true_count as i64)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

pub const SEEDS: [u64; 3] = [7, 11, 13];
pub const FRAME_RATES: [f64; 3] = [30.0, 60.0, 120.0];

/// A 120 fps stream in rows of 17 objects moving down 4 px per frame.
/// The first `crossing` objects pass the default line and leave the frame;
/// the rest stop at y = 600.
pub fn crossing_stream(crossing: usize, staying: usize) -> DetectionStream {
    let fps = 120.0;
    let mut stream = DetectionStream::new(fps);
    let n_frames = 400;
    stream.frames = (0..n_frames)
        .map(|f| {
            let mut dets = Vec::new();
            for k in 0..crossing + staying {
                let x = 10.0 + 40.0 * (k % 17) as f64;
                let lane = (k / 17) as f64;
                let start = 100.0 - 30.0 * lane + 2.0 * (k % 3) as f64;
                let mut y = start + 4.0 * f as f64;
                if k >= crossing {
                    y = y.min(600.0);
                }
                if y < 0.0 || y + 24.0 > 1280.0 {
                    continue;
                }
                let b = BBox::new(x, y, 26.0, 24.0).unwrap();
                dets.push(Detection::new(b, 0.9, (k % 2) as u32).unwrap());
            }
            FrameDetections::new(f as u64, fps, dets)
        })
        .collect();
    stream
}

