use proptest::prelude::*;
use seedcount::eval::{average_precision_50, evaluate, match_detections, ImageMatches};
use seedcount::{BBox, Detection};

fn arb_image() -> impl Strategy<Value = (Vec<Detection>, Vec<BBox>)> {
    let gts = prop::collection::vec((0.0..200.0f64, 0.0..200.0f64), 1..8);
    let preds = prop::collection::vec((0.0..200.0f64, 0.0..200.0f64, 0.01..1.0f64), 0..10);
    (gts, preds).prop_map(|(g, p)| {
        (
            p.into_iter()
                .map(|(x, y, c)| Detection::new(BBox::new(x, y, 20.0, 20.0).unwrap(), c, 0).unwrap())
                .collect(),
            g.into_iter().map(|(x, y)| BBox::new(x, y, 20.0, 20.0).unwrap()).collect(),
        )
    })
}

proptest! {
    #[test]
    fn metrics_are_bounded(images in prop::collection::vec(arb_image(), 1..4)) {
        let m: Vec<ImageMatches> = images.iter().map(|(p, g)| match_detections(p, g, 0.5)).collect();
        let r = evaluate(&m);
        prop_assert!((0.0..=1.0).contains(&r.precision));
        prop_assert!((0.0..=1.0).contains(&r.recall));
        let ap = r.ap50.unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ap));
        for mi in &m {
            prop_assert!(mi.tp() <= mi.n_gt);
        }
    }

    #[test]
    fn duplicating_predictions_keeps_recall(images in prop::collection::vec(arb_image(), 1..4)) {
        let once: Vec<ImageMatches> = images.iter().map(|(p, g)| match_detections(p, g, 0.5)).collect();
        let twice: Vec<ImageMatches> = images
            .iter()
            .map(|(p, g)| {
                let doubled: Vec<Detection> = p.iter().chain(p.iter()).cloned().collect();
                match_detections(&doubled, g, 0.5)
            })
            .collect();
        let (a, b) = (evaluate(&once), evaluate(&twice));
        prop_assert_eq!(a.recall, b.recall);
        prop_assert!(b.precision <= a.precision);
    }

    #[test]
    fn ap_ignores_order_preserving_rescaling(images in prop::collection::vec(arb_image(), 1..4), k in 0.05..1.0f64) {
        let base: Vec<ImageMatches> = images.iter().map(|(p, g)| match_detections(p, g, 0.5)).collect();
        let scaled: Vec<ImageMatches> = base
            .iter()
            .map(|m| ImageMatches {
                scored: m.scored.iter().map(|(c, tp)| (c * k, *tp)).collect(),
                n_gt: m.n_gt,
            })
            .collect();
        prop_assert_eq!(average_precision_50(&base).unwrap(), average_precision_50(&scaled).unwrap());
    }
}
