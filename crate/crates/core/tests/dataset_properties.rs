use std::fs;

use image::{Rgb, RgbImage, Rgba, RgbaImage};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seedcount::dataset::{
    alpha_extent, augment_sprite, builtin_sprites, generate_dataset, generate_image, load_sprites, Background,
    DatasetSpec, SpriteAsset,
};
use seedcount::io::read_yolo_annotation;

fn small_spec(n: usize) -> DatasetSpec {
    DatasetSpec {
        n_images: n,
        ..DatasetSpec::default()
    }
}

#[test]
fn annotations_tightly_contain_sprite_alpha() {
    let spec = small_spec(6);
    let sprites = builtin_sprites();
    let dir = tempfile::tempdir().unwrap();
    let manifest = generate_dataset(&sprites, &spec, dir.path()).unwrap();
    for e in &manifest.entries {
        let objs = read_yolo_annotation(&dir.path().join(&e.label_path), spec.image_w, spec.image_h).unwrap();
        let img = generate_image(&sprites, &spec, e.index).unwrap();
        assert_eq!(objs.len(), img.kernels.len());
        for (o, k) in objs.iter().zip(&img.kernels) {
            let (x0, y0, x1, y1) = alpha_extent(k.sprite.image()).unwrap();
            let extent = [
                f64::from(k.rect.x + x0),
                f64::from(k.rect.y + y0),
                f64::from(k.rect.x + x1),
                f64::from(k.rect.y + y1),
            ];
            let b = o.bbox;
            let got = [b.x_min(), b.y_min(), b.x_max(), b.y_max()];
            for (g, w) in got.iter().zip(extent) {
                assert!((g - w).abs() <= 1.0, "image {}: {got:?} vs {extent:?}", e.index);
            }
            assert_eq!(o.class_id, k.class_id);
        }
    }
}

#[test]
fn images_do_not_depend_on_scheduling() {
    let spec = small_spec(8);
    let sprites = builtin_sprites();
    let dir = tempfile::tempdir().unwrap();
    generate_dataset(&sprites, &spec, dir.path()).unwrap();
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    for (i, line) in manifest.lines().enumerate() {
        let path = line.split(' ').next().unwrap();
        let on_disk = image::open(dir.path().join(path)).unwrap().to_rgb8();
        assert_eq!(on_disk, generate_image(&sprites, &spec, i).unwrap().image);
    }
}

#[test]
fn stricter_overlap_limits_hold() {
    for frac in [0.0, 0.1] {
        let spec = DatasetSpec {
            max_overlap_frac: frac,
            ..small_spec(4)
        };
        for i in 0..4 {
            let img = generate_image(&builtin_sprites(), &spec, i).unwrap();
            for (a, ka) in img.kernels.iter().enumerate() {
                for kb in &img.kernels[a + 1..] {
                    let inter = ka.rect.intersection_area(&kb.rect) as f64;
                    assert!(inter <= frac * ka.rect.area().min(kb.rect.area()) as f64);
                }
            }
        }
    }
}

#[test]
fn sprites_load_from_class_directories() {
    let dir = tempfile::tempdir().unwrap();
    for class in ["0", "1"] {
        fs::create_dir_all(dir.path().join(class)).unwrap();
        let mut img = RgbaImage::new(12, 10);
        for y in 2..8 {
            for x in 3..9 {
                img.put_pixel(x, y, Rgba([120, 90, 40, 255]));
            }
        }
        img.save(dir.path().join(class).join("a.png")).unwrap();
    }
    fs::write(dir.path().join("0").join("notes.txt"), "ignored").unwrap();
    let sprites = load_sprites(dir.path()).unwrap();
    assert_eq!(sprites.len(), 2);
    assert_eq!((sprites[0].width(), sprites[0].height()), (6, 6));
    assert_eq!(sprites[1].class_id, 1);
    let spec = DatasetSpec {
        kernels_min: 3,
        kernels_max: 5,
        ..small_spec(2)
    };
    assert!(generate_image(&sprites, &spec, 0).is_ok());
}

#[test]
fn raster_background_is_used() {
    let bg = RgbImage::from_pixel(64, 64, Rgb([200, 10, 10]));
    let spec = DatasetSpec {
        background: Background::Raster(bg),
        kernels_min: 1,
        kernels_max: 1,
        ..small_spec(1)
    };
    let img = generate_image(&builtin_sprites(), &spec, 0).unwrap();
    assert_eq!(img.image.dimensions(), (320, 320));
    let k = img.kernels[0].rect;
    let corner = if k.x > 0 || k.y > 0 { (0, 0) } else { (319, 319) };
    assert_eq!(*img.image.get_pixel(corner.0, corner.1), Rgb([200, 10, 10]));
}

#[test]
fn empty_sprite_is_rejected() {
    assert!(SpriteAsset::new(RgbaImage::new(4, 4), 0, "blank").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn augmented_sprites_are_tight(rot in 0.0..360.0f64, fh in any::<bool>(), fv in any::<bool>(), sigma in 0.0..20.0f64, seed in any::<u64>()) {
        let base = &builtin_sprites()[3];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = augment_sprite(base, rot, fh, fv, sigma, &mut rng);
        prop_assert_eq!(alpha_extent(out.image()), Some((0, 0, out.width(), out.height())));
        prop_assert_eq!(out.class_id, base.class_id);
    }
}
