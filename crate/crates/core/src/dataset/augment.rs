use rand::Rng as _;

use super::{Augmentation, Example, Manifest, Split};
use crate::imaging::Image;
use crate::rng::{stream, Purpose};

/// Rows removed from the top by the crop variant.
pub const CROP_ROWS: usize = 10;
pub const ROTATION_DEG: f64 = 10.0;

/// Each train example becomes three records: the original, a top-crop and a
/// rotation by +10 or -10 degrees (seeded coin flip per example). Validation
/// examples pass through. The transforms are applied when the image is
/// loaded (see [`apply_augmentation`]); there is no horizontal flip since that
/// would reverse time.
pub fn augment(m: &Manifest, seed: u64) -> Manifest {
    let mut out = Vec::with_capacity(m.len() * 3);
    for (i, e) in m.examples.iter().enumerate() {
        if e.split != Some(Split::Train) {
            out.push(e.clone());
            continue;
        }
        out.push(e.clone());
        out.push(Example {
            id: format!("{}#crop10", e.id),
            augmentation: Augmentation::Crop10,
            rotation_deg: 0.0,
            ..e.clone()
        });
        let sign = if stream(seed, Purpose::Augment, i as u64).random::<bool>() {
            1.0
        } else {
            -1.0
        };
        out.push(Example {
            id: format!("{}#rot", e.id),
            augmentation: Augmentation::Rotate,
            rotation_deg: sign * ROTATION_DEG,
            ..e.clone()
        });
    }
    m.with_examples(out)
}

/// Applies an example's augmentation to its (un-normalized) spectrogram image.
/// Blank regions uncovered by rotation take the 0.0 intensity floor.
pub fn apply_augmentation(img: &Image, aug: Augmentation, rotation_deg: f64) -> Image {
    match aug {
        Augmentation::Original => img.clone(),
        Augmentation::Crop10 => img.crop_resize(
            (CROP_ROWS as f64, 0.0, img.height as f64, img.width as f64),
            img.height,
            img.width,
        ),
        Augmentation::Rotate => img.rotate(rotation_deg, 0.0),
    }
}
