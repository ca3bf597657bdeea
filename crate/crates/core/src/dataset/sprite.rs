//! RGBA seed sprites and their augmentations.

use std::fs;
use std::path::Path;

use image::{imageops, Rgba, RgbaImage};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Alpha below this is treated as background after resampling.
const ALPHA_CUTOFF: u8 = 16;

/// Foreground sprite; the raster is cropped tightly to its nonzero alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct SpriteAsset {
    image: RgbaImage,
    pub class_id: u32,
    pub source_id: String,
}

impl SpriteAsset {
    /// Crops `image` to its nonzero alpha. Fails if the alpha is empty.
    pub fn new(image: RgbaImage, class_id: u32, source_id: impl Into<String>) -> Result<Self> {
        let source_id = source_id.into();
        let (x0, y0, x1, y1) = alpha_extent(&image).ok_or_else(|| {
            Error::InvalidDetection(format!("sprite {source_id} has no foreground pixels"))
        })?;
        let image = if (x0, y0, x1, y1) == (0, 0, image.width(), image.height()) {
            image
        } else {
            imageops::crop_imm(&image, x0, y0, x1 - x0, y1 - y0).to_image()
        };
        Ok(SpriteAsset {
            image,
            class_id,
            source_id,
        })
    }

    pub fn image(&self) -> &RgbaImage {
        &self.image
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }
}

/// Half-open `(x0, y0, x1, y1)` bounds of nonzero alpha.
pub fn alpha_extent(img: &RgbaImage) -> Option<(u32, u32, u32, u32)> {
    let mut ext: Option<(u32, u32, u32, u32)> = None;
    for (x, y, p) in img.enumerate_pixels() {
        if p[3] > 0 {
            ext = Some(match ext {
                None => (x, y, x + 1, y + 1),
                Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x + 1), d.max(y + 1)),
            });
        }
    }
    ext
}

/// Rotates about the sprite center, then flips, then adds Gaussian noise
/// to the RGB channels of foreground pixels. The result is tight-cropped.
pub fn augment_sprite<R: Rng + ?Sized>(
    sprite: &SpriteAsset,
    rotation_deg: f64,
    flip_h: bool,
    flip_v: bool,
    noise_sigma: f64,
    rng: &mut R,
) -> SpriteAsset {
    let deg = rotation_deg.rem_euclid(360.0);
    let mut img = if deg == 0.0 {
        sprite.image.clone()
    } else if deg == 90.0 {
        imageops::rotate90(&sprite.image)
    } else if deg == 180.0 {
        imageops::rotate180(&sprite.image)
    } else if deg == 270.0 {
        imageops::rotate270(&sprite.image)
    } else {
        rotate_bilinear(&sprite.image, deg)
    };
    if flip_h {
        imageops::flip_horizontal_in_place(&mut img);
    }
    if flip_v {
        imageops::flip_vertical_in_place(&mut img);
    }
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("positive sigma");
        for p in img.pixels_mut() {
            if p[3] == 0 {
                continue;
            }
            for c in 0..3 {
                let v = f64::from(p[c]) + normal.sample(rng);
                p[c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    match SpriteAsset::new(img, sprite.class_id, sprite.source_id.clone()) {
        Ok(s) => s,
        // Rotation of a sprite thinner than the alpha cutoff can erase it; keep the original.
        Err(_) => sprite.clone(),
    }
}

fn rotate_bilinear(src: &RgbaImage, deg: f64) -> RgbaImage {
    let (w, h) = (f64::from(src.width()), f64::from(src.height()));
    let (s, c) = deg.to_radians().sin_cos();
    let out_w = (w * c.abs() + h * s.abs()).ceil().max(1.0) as u32;
    let out_h = (w * s.abs() + h * c.abs()).ceil().max(1.0) as u32;
    let (scx, scy) = (w / 2.0, h / 2.0);
    let (dcx, dcy) = (f64::from(out_w) / 2.0, f64::from(out_h) / 2.0);
    let mut out = RgbaImage::new(out_w, out_h);
    for (x, y, p) in out.enumerate_pixels_mut() {
        let dx = f64::from(x) + 0.5 - dcx;
        let dy = f64::from(y) + 0.5 - dcy;
        // inverse rotation back into source pixel space
        let sx = c * dx + s * dy + scx - 0.5;
        let sy = -s * dx + c * dy + scy - 0.5;
        *p = sample_bilinear(src, sx, sy);
        if p[3] < ALPHA_CUTOFF {
            *p = Rgba([0, 0, 0, 0]);
        }
    }
    out
}

fn sample_bilinear(src: &RgbaImage, x: f64, y: f64) -> Rgba<u8> {
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let mut acc = [0.0f64; 4];
    for (ox, oy, wgt) in [
        (0.0, 0.0, (1.0 - fx) * (1.0 - fy)),
        (1.0, 0.0, fx * (1.0 - fy)),
        (0.0, 1.0, (1.0 - fx) * fy),
        (1.0, 1.0, fx * fy),
    ] {
        let (px, py) = (x0 + ox, y0 + oy);
        if px < 0.0 || py < 0.0 || px >= f64::from(src.width()) || py >= f64::from(src.height()) {
            continue;
        }
        let p = src.get_pixel(px as u32, py as u32);
        let a = f64::from(p[3]) * wgt;
        // alpha-weighted color so transparent texels do not darken edges
        for c in 0..3 {
            acc[c] += f64::from(p[c]) * a;
        }
        acc[3] += a;
    }
    if acc[3] <= 0.0 {
        return Rgba([0, 0, 0, 0]);
    }
    let rgb = |c: usize| (acc[c] / acc[3]).round().clamp(0.0, 255.0) as u8;
    Rgba([rgb(0), rgb(1), rgb(2), acc[3].round().clamp(0.0, 255.0) as u8])
}

/// Procedural stand-ins for photographed kernels: round soy (class 0) and
/// elongated, creased wheat (class 1), three size variants each.
pub fn builtin_sprites() -> Vec<SpriteAsset> {
    let mut out = Vec::new();
    for (k, (rx, ry)) in [(8.0, 7.5), (7.0, 6.5), (9.0, 8.0)].into_iter().enumerate() {
        out.push(ellipse_sprite(0, format!("soy-{k}"), rx, ry, [196, 160, 92], false));
    }
    for (k, (rx, ry)) in [(11.0, 5.5), (10.0, 5.0), (12.0, 6.0)].into_iter().enumerate() {
        out.push(ellipse_sprite(1, format!("wheat-{k}"), rx, ry, [176, 112, 54], true));
    }
    out
}

fn ellipse_sprite(class_id: u32, id: String, rx: f64, ry: f64, base: [u8; 3], crease: bool) -> SpriteAsset {
    let w = (2.0 * rx).ceil() as u32 + 2;
    let h = (2.0 * ry).ceil() as u32 + 2;
    let (cx, cy) = (f64::from(w) / 2.0, f64::from(h) / 2.0);
    let img = RgbaImage::from_fn(w, h, |x, y| {
        let dx = (f64::from(x) + 0.5 - cx) / rx;
        let dy = (f64::from(y) + 0.5 - cy) / ry;
        let r2 = dx * dx + dy * dy;
        if r2 > 1.0 {
            return Rgba([0, 0, 0, 0]);
        }
        // darker toward the rim, a thin dark crease along the long axis
        let mut shade = 1.0 - 0.35 * r2;
        if crease && dy.abs() < 0.12 {
            shade *= 0.7;
        }
        let ch = |c: u8| (f64::from(c) * shade).round() as u8;
        Rgba([ch(base[0]), ch(base[1]), ch(base[2]), 255])
    });
    SpriteAsset::new(img, class_id, id).expect("ellipse has foreground")
}

/// Loads `dir/<class_id>/*.png` as sprites.
pub fn load_sprites(dir: &Path) -> Result<Vec<SpriteAsset>> {
    let mut class_dirs: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<Vec<_>>>()?;
    class_dirs.sort_by_key(|e| e.file_name());
    let mut out = Vec::new();
    for entry in class_dirs {
        let Some(class_id) = entry.file_name().to_str().and_then(|s| s.parse::<u32>().ok()) else {
            continue;
        };
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let mut files: Vec<_> = fs::read_dir(entry.path())?.collect::<std::io::Result<Vec<_>>>()?;
        files.sort_by_key(|e| e.file_name());
        for f in files {
            let p = f.path();
            if p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() != Some("png") {
                continue;
            }
            let img = image::open(&p)?.to_rgba8();
            out.push(SpriteAsset::new(img, class_id, p.display().to_string())?);
        }
    }
    Ok(out)
}
