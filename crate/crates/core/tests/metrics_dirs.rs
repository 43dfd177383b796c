use agrisynth::dataset::{label_file_name, write_image};
use agrisynth::metrics::evaluate;
use agrisynth::raster::Raster;
use agrisynth::scene::LabelPalette;
use agrisynth::Error;

fn write_masks(dir: &std::path::Path, masks: &[Raster<[u8; 3]>]) {
    for (i, m) in masks.iter().enumerate() {
        write_image(m, &dir.join(label_file_name(i as u64))).unwrap();
    }
}

#[test]
fn directory_evaluation_pools_pixels() {
    let p = LabelPalette::default();
    let (pred, gt) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    // Image 0: 6 soil right, 2 soil as crop. Image 1: 1 crop as soil, 1 crop right.
    let gt_masks = [
        Raster::from_fn(8, 1, |_, _| p.soil),
        Raster::from_fn(2, 1, |_, _| p.crop),
    ];
    let pred_masks = [
        Raster::from_fn(8, 1, |x, _| if x < 6 { p.soil } else { p.crop }),
        Raster::from_fn(2, 1, |x, _| if x == 0 { p.soil } else { p.crop }),
    ];
    write_masks(gt.path(), &gt_masks);
    write_masks(pred.path(), &pred_masks);
    let r = evaluate(pred.path(), gt.path(), &p, false).unwrap();
    assert_eq!(r.images, 2);
    assert_eq!(r.pixels, 10);
    assert!((r.global_accuracy - 70.0).abs() < 1e-9);
    assert!((r.class_accuracy - 62.5).abs() < 1e-9);

    let v = evaluate(pred.path(), gt.path(), &p, true).unwrap();
    assert_eq!(v.classes.len(), 2);
}

#[test]
fn missing_prediction_is_reported_by_name() {
    let p = LabelPalette::default();
    let (pred, gt) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mask = Raster::from_fn(4, 4, |_, _| p.soil);
    write_masks(gt.path(), &[mask.clone(), mask.clone()]);
    write_masks(pred.path(), &[mask]);
    let err = evaluate(pred.path(), gt.path(), &p, false).unwrap_err();
    assert!(matches!(err, Error::FileSetMismatch(_)), "{err}");
    assert!(err.to_string().contains(&label_file_name(1)), "{err}");
}

#[test]
fn unknown_colors_are_rejected_with_position() {
    let p = LabelPalette::default();
    let (pred, gt) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_masks(gt.path(), &[Raster::from_fn(3, 3, |_, _| p.soil)]);
    write_masks(pred.path(), &[Raster::from_fn(3, 3, |x, y| if (x, y) == (2, 1) { [1, 2, 3] } else { p.soil })]);
    let err = evaluate(pred.path(), gt.path(), &p, false).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains(&label_file_name(0)) && msg.contains("(2, 1)") && msg.contains("[1, 2, 3]"), "{msg}");
}
