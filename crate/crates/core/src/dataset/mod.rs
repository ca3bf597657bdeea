//! Domain-randomization compositor.
//!
//! Augmented seed sprites are pasted onto a light background by rejection
//! sampling. For any two kernels on an image, the intersection of their
//! boxes may cover at most `max_overlap_frac` of the smaller box. Each image
//! gets a YOLO annotation, and a manifest records the train/val split.
//!
//! Image `i` draws from its own ChaCha stream derived from `(rng_seed, i)`,
//! so output does not depend on how images are scheduled across threads.

pub mod sprite;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use image::{imageops, Rgb, RgbImage, RgbaImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::io::yolo::{write_yolo_annotation, YoloObject};
pub use sprite::{alpha_extent, augment_sprite, builtin_sprites, load_sprites, SpriteAsset};

pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum Background {
    Solid([u8; 3]),
    /// Resized to the output size when dimensions differ.
    Raster(RgbImage),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub n_images: usize,
    pub image_w: u32,
    pub image_h: u32,
    pub kernels_min: usize,
    pub kernels_max: usize,
    pub max_overlap_frac: f64,
    pub flip_prob: f64,
    /// Standard deviation of additive RGB noise, in 8-bit levels.
    pub noise_sigma: f64,
    pub background: Background,
    pub rng_seed: u64,
    pub train_val_split: f64,
    /// Each kernel's class is drawn uniformly from this list.
    pub classes: Vec<u32>,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            n_images: 200,
            image_w: 320,
            image_h: 320,
            kernels_min: 25,
            kernels_max: 50,
            max_overlap_frac: 0.25,
            flip_prob: 0.5,
            noise_sigma: 6.0,
            background: Background::Solid([236, 236, 228]),
            rng_seed: 7,
            train_val_split: 0.8,
            classes: vec![0, 1],
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.image_w == 0 || self.image_h == 0 {
            return Err(Error::config("image_size", "must be positive"));
        }
        if self.kernels_min == 0 || self.kernels_min > self.kernels_max {
            return Err(Error::config(
                "kernels_per_image",
                format!("invalid range [{}, {}]", self.kernels_min, self.kernels_max),
            ));
        }
        if !(0.0..1.0).contains(&self.max_overlap_frac) {
            return Err(Error::config("max_overlap_frac", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(Error::config("flip_prob", "must lie in [0, 1]"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::config("noise_sigma", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.train_val_split) {
            return Err(Error::config("train_val_split", "must lie in [0, 1]"));
        }
        if self.classes.is_empty() {
            return Err(Error::config("classes", "at least one class is required"));
        }
        Ok(())
    }

    pub fn n_train(&self) -> usize {
        (self.train_val_split * self.n_images as f64).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

/// Integer pixel rectangle `[x, x + w) × [y, y + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn intersection_area(&self, o: &Rect) -> u64 {
        let x0 = self.x.max(o.x);
        let y0 = self.y.max(o.y);
        let x1 = (self.x + self.w).min(o.x + o.w);
        let y1 = (self.y + self.h).min(o.y + o.h);
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            u64::from(x1 - x0) * u64::from(y1 - y0)
        }
    }

    pub fn to_bbox(&self) -> BBox {
        BBox::new(f64::from(self.x), f64::from(self.y), f64::from(self.w), f64::from(self.h))
            .expect("sprites are non-empty")
    }
}

/// Intersection over the smaller area must not exceed `max_frac`.
pub fn overlap_allowed(a: &Rect, b: &Rect, max_frac: f64) -> bool {
    let inter = a.intersection_area(b) as f64;
    inter <= max_frac * a.area().min(b.area()) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedKernel {
    pub rect: Rect,
    pub class_id: u32,
    pub sprite: SpriteAsset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedImage {
    pub index: usize,
    pub image: RgbImage,
    pub kernels: Vec<PlacedKernel>,
}

impl GeneratedImage {
    pub fn annotations(&self) -> Vec<YoloObject> {
        self.kernels
            .iter()
            .map(|k| YoloObject {
                class_id: k.class_id,
                bbox: k.rect.to_bbox(),
            })
            .collect()
    }
}

fn background_canvas(spec: &DatasetSpec) -> RgbImage {
    match &spec.background {
        Background::Solid(c) => RgbImage::from_pixel(spec.image_w, spec.image_h, Rgb(*c)),
        Background::Raster(img) if img.dimensions() == (spec.image_w, spec.image_h) => img.clone(),
        Background::Raster(img) => {
            imageops::resize(img, spec.image_w, spec.image_h, imageops::FilterType::Triangle)
        }
    }
}

fn composite(canvas: &mut RgbImage, sprite: &RgbaImage, x: u32, y: u32) {
    for (sx, sy, p) in sprite.enumerate_pixels() {
        let a = u32::from(p[3]);
        if a == 0 {
            continue;
        }
        let dst = canvas.get_pixel_mut(x + sx, y + sy);
        for c in 0..3 {
            let v = (u32::from(p[c]) * a + u32::from(dst[c]) * (255 - a) + 127) / 255;
            dst[c] = v as u8;
        }
    }
}

fn sprites_by_class<'a>(sprites: &'a [SpriteAsset], classes: &[u32]) -> Result<BTreeMap<u32, Vec<&'a SpriteAsset>>> {
    let mut map = BTreeMap::new();
    for &c in classes {
        let v: Vec<&SpriteAsset> = sprites.iter().filter(|s| s.class_id == c).collect();
        if v.is_empty() {
            return Err(Error::MissingSpriteClass(c));
        }
        map.insert(c, v);
    }
    Ok(map)
}

fn image_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Composes image `index` in memory.
pub fn generate_image(sprites: &[SpriteAsset], spec: &DatasetSpec, index: usize) -> Result<GeneratedImage> {
    spec.validate()?;
    let by_class = sprites_by_class(sprites, &spec.classes)?;
    compose(&by_class, spec, index)
}

fn compose(by_class: &BTreeMap<u32, Vec<&SpriteAsset>>, spec: &DatasetSpec, index: usize) -> Result<GeneratedImage> {
    let mut rng = image_rng(spec.rng_seed, index);
    let n = rng.random_range(spec.kernels_min..=spec.kernels_max);
    let mut canvas = background_canvas(spec);
    let mut kernels: Vec<PlacedKernel> = Vec::with_capacity(n);

    for k in 0..n {
        let class_id = spec.classes[rng.random_range(0..spec.classes.len())];
        let pool = &by_class[&class_id];
        let base = pool[rng.random_range(0..pool.len())];
        let rotation = rng.random_range(0.0..360.0);
        let flip_h = rng.random::<f64>() < spec.flip_prob;
        let flip_v = rng.random::<f64>() < spec.flip_prob;
        let sprite = augment_sprite(base, rotation, flip_h, flip_v, spec.noise_sigma, &mut rng);
        let (w, h) = (sprite.width(), sprite.height());
        if w > spec.image_w || h > spec.image_h {
            return Err(Error::PlacementFailed {
                image: index,
                kernel: k,
                attempts: 0,
            });
        }

        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let rect = Rect {
                x: rng.random_range(0..=spec.image_w - w),
                y: rng.random_range(0..=spec.image_h - h),
                w,
                h,
            };
            if kernels
                .iter()
                .all(|o| overlap_allowed(&rect, &o.rect, spec.max_overlap_frac))
            {
                placed = Some(rect);
                break;
            }
        }
        let rect = placed.ok_or(Error::PlacementFailed {
            image: index,
            kernel: k,
            attempts: MAX_PLACEMENT_ATTEMPTS,
        })?;
        composite(&mut canvas, sprite.image(), rect.x, rect.y);
        kernels.push(PlacedKernel {
            rect,
            class_id,
            sprite,
        });
    }
    Ok(GeneratedImage {
        index,
        image: canvas,
        kernels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub index: usize,
    pub split: Split,
    /// Relative to the output directory.
    pub image_path: PathBuf,
    pub label_path: PathBuf,
    pub kernel_count: usize,
    pub per_class: BTreeMap<u32, usize>,
}

impl ManifestEntry {
    pub fn to_line(&self) -> String {
        let classes: Vec<String> = self.per_class.iter().map(|(c, n)| format!("{c}={n}")).collect();
        format!(
            "{} {} {} {}",
            self.image_path.display(),
            self.split.as_str(),
            self.kernel_count,
            classes.join(" ")
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

/// Seeded shuffle of image indices; the first `n_train` become training images.
pub fn split_assignment(spec: &DatasetSpec) -> Vec<Split> {
    let mut order: Vec<usize> = (0..spec.n_images).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    order.shuffle(&mut rng);
    let mut splits = vec![Split::Val; spec.n_images];
    for &i in &order[..spec.n_train()] {
        splits[i] = Split::Train;
    }
    splits
}

/// Writes `images/{split}/img_NNNNN.png`, `labels/{split}/img_NNNNN.txt` and
/// `manifest.txt` under `out_dir`.
pub fn generate_dataset(sprites: &[SpriteAsset], spec: &DatasetSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    let by_class = sprites_by_class(sprites, &spec.classes)?;
    let splits = split_assignment(spec);
    for split in [Split::Train, Split::Val] {
        fs::create_dir_all(out_dir.join("images").join(split.as_str()))?;
        fs::create_dir_all(out_dir.join("labels").join(split.as_str()))?;
    }

    let results: Vec<Result<ManifestEntry>> = (0..spec.n_images)
        .into_par_iter()
        .map(|i| {
            let img = compose(&by_class, spec, i)?;
            let split = splits[i];
            let image_path = Path::new("images").join(split.as_str()).join(format!("img_{i:05}.png"));
            let label_path = Path::new("labels").join(split.as_str()).join(format!("img_{i:05}.txt"));
            img.image.save_with_format(out_dir.join(&image_path), image::ImageFormat::Png)?;
            write_yolo_annotation(&img.annotations(), spec.image_w, spec.image_h, &out_dir.join(&label_path))?;
            let mut per_class = BTreeMap::new();
            for k in &img.kernels {
                *per_class.entry(k.class_id).or_insert(0) += 1;
            }
            Ok(ManifestEntry {
                index: i,
                split,
                image_path,
                label_path,
                kernel_count: img.kernels.len(),
                per_class,
            })
        })
        .collect();
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;

    let mut manifest = String::new();
    for e in &entries {
        manifest.push_str(&e.to_line());
        manifest.push('\n');
    }
    fs::write(out_dir.join("manifest.txt"), manifest)?;
    Ok(DatasetManifest { entries })
}
