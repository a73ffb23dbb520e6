//! Feature-space analogs of the image augmentations: coordinate masking stands
//! in for cropping, global scaling for colour jitter and additive noise for
//! blur.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentParams {
    /// Per-view mask rate is drawn from U[0, max_mask_rate].
    pub max_mask_rate: f64,
    pub scale_lo: f64,
    pub scale_hi: f64,
    pub noise_sigma: f64,
}

impl AugmentParams {
    pub const IDENTITY: AugmentParams =
        AugmentParams { max_mask_rate: 0.0, scale_lo: 1.0, scale_hi: 1.0, noise_sigma: 0.0 };
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentPolicy {
    /// Masking, scaling and additive noise.
    #[default]
    SimclrAnalog,
    /// Light masking only.
    ClipAnalog,
}

impl AugmentPolicy {
    pub fn params(self) -> AugmentParams {
        match self {
            AugmentPolicy::SimclrAnalog => {
                AugmentParams { max_mask_rate: 0.3, scale_lo: 0.8, scale_hi: 1.2, noise_sigma: 0.05 }
            }
            AugmentPolicy::ClipAnalog => AugmentParams { max_mask_rate: 0.1, ..AugmentParams::IDENTITY },
        }
    }
}

pub fn augment_image(image: &[f64], params: &AugmentParams, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = image.to_vec();
    augment_in_place(&mut out, params, rng);
    out
}

pub fn augment_in_place(out: &mut [f64], params: &AugmentParams, rng: &mut impl Rng) {
    if params.max_mask_rate > 0.0 {
        let rate = rng.random_range(0.0..=params.max_mask_rate);
        for x in out.iter_mut() {
            if rng.random::<f64>() < rate {
                *x = 0.0;
            }
        }
    }
    if params.scale_hi > params.scale_lo {
        let s = rng.random_range(params.scale_lo..=params.scale_hi);
        out.iter_mut().for_each(|x| *x *= s);
    } else if params.scale_lo != 1.0 {
        out.iter_mut().for_each(|x| *x *= params.scale_lo);
    }
    if params.noise_sigma > 0.0 {
        for x in out.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *x += params.noise_sigma * z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn image() -> Vec<f64> {
        (0..32).map(|i| (i as f64 - 15.5) / 10.0).collect()
    }

    #[test]
    fn null_augmentation_is_identity() {
        let img = image();
        let out = augment_image(&img, &AugmentParams::IDENTITY, &mut stream(1, "a", 0));
        assert_eq!(out, img);
    }

    #[test]
    fn clip_analog_only_masks() {
        let img = image();
        let mut rng = stream(2, "a", 0);
        for _ in 0..200 {
            let out = augment_image(&img, &AugmentPolicy::ClipAnalog.params(), &mut rng);
            for (o, i) in out.iter().zip(&img) {
                assert!(*o == 0.0 || o == i);
            }
        }
    }

    #[test]
    fn seeded_draws_are_reproducible() {
        let img = image();
        let p = AugmentPolicy::SimclrAnalog.params();
        let a = augment_image(&img, &p, &mut stream(9, "a", 0));
        let b = augment_image(&img, &p, &mut stream(9, "a", 0));
        let c = augment_image(&img, &p, &mut stream(10, "a", 0));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
