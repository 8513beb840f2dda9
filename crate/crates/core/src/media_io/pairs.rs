use rand::Rng;

use super::image::ImageTensor;
use super::MediaError;
use crate::melspec::MelSpectrogram;

/// Largest reference-frame shift.
pub const MAX_FRAME_SHIFT: usize = 6;

/// Target frame `S`, shifted reference frame `S'`, and the audio window of
/// the target.
#[derive(Clone, Debug, PartialEq)]
pub struct FramePair {
    pub target: ImageTensor,
    pub reference: ImageTensor,
    /// Signed offset of the reference frame relative to the target.
    pub alpha: i32,
    pub frame_index: usize,
    pub audio: MelSpectrogram,
}

impl FramePair {
    pub fn reference_index(&self) -> usize {
        (self.frame_index as i64 + self.alpha as i64) as usize
    }
}

/// Draws a signed shift for every frame of an `n_frames` video.
///
/// `α` is uniform in `1..=alpha_max` with a uniform sign. If the shifted
/// index falls outside the video the sign is flipped; if that is still
/// outside, a shift is redrawn uniformly from the feasible ones. Frames with
/// no feasible shift (only possible in a one-frame video) are skipped.
pub fn plan_frame_shifts<R: Rng + ?Sized>(
    n_frames: usize,
    alpha_max: usize,
    rng: &mut R,
) -> Result<Vec<(usize, i32)>, MediaError> {
    if n_frames == 0 {
        return Err(MediaError::EmptyFrames);
    }
    if alpha_max == 0 || alpha_max > MAX_FRAME_SHIFT {
        return Err(MediaError::InvalidArgument(format!(
            "alpha_max must be in 1..={MAX_FRAME_SHIFT}, got {alpha_max}"
        )));
    }
    let n = n_frames as i64;
    let mut out = Vec::with_capacity(n_frames);
    for i in 0..n {
        let alpha = rng.random_range(1..=alpha_max as i64);
        let sign = if rng.random_bool(0.5) { 1 } else { -1 };
        let shift = resolve_shift(i, n, alpha_max as i64, sign * alpha, |k| {
            rng.random_range(0..k)
        });
        if let Some(s) = shift {
            out.push((i as usize, s as i32));
        }
    }
    Ok(out)
}

/// Applies the boundary policy to one drawn shift. `pick(k)` returns a
/// uniform index in `0..k`.
pub fn resolve_shift(
    i: i64,
    n: i64,
    alpha_max: i64,
    drawn: i64,
    mut pick: impl FnMut(usize) -> usize,
) -> Option<i64> {
    let inside = |s: i64| (0..n).contains(&(i + s));
    if inside(drawn) {
        return Some(drawn);
    }
    if inside(-drawn) {
        return Some(-drawn);
    }
    let feasible: Vec<i64> = (-alpha_max..=alpha_max)
        .filter(|&s| s != 0 && inside(s))
        .collect();
    if feasible.is_empty() {
        None
    } else {
        Some(feasible[pick(feasible.len())])
    }
}

/// Builds one [`FramePair`] per frame with a feasible shift.
pub fn make_frame_pairs<R: Rng + ?Sized>(
    frames: &[ImageTensor],
    mels: &[MelSpectrogram],
    alpha_max: usize,
    rng: &mut R,
) -> Result<Vec<FramePair>, MediaError> {
    if frames.is_empty() {
        return Err(MediaError::EmptyFrames);
    }
    if frames.len() != mels.len() {
        return Err(MediaError::InvalidArgument(format!(
            "{} frames but {} mel windows",
            frames.len(),
            mels.len()
        )));
    }
    let dims = frames[0].dims();
    if let Some(f) = frames.iter().find(|f| f.dims() != dims) {
        return Err(MediaError::InvalidArgument(format!(
            "frame dimensions differ: {:?} vs {:?}",
            dims,
            f.dims()
        )));
    }
    Ok(plan_frame_shifts(frames.len(), alpha_max, rng)?
        .into_iter()
        .map(|(i, alpha)| FramePair {
            target: frames[i].clone(),
            reference: frames[(i as i64 + alpha as i64) as usize].clone(),
            alpha,
            frame_index: i,
            audio: mels[i].clone(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn in_range_shift_kept() {
        assert_eq!(resolve_shift(5, 10, 6, -3, |_| unreachable!()), Some(-3));
    }

    #[test]
    fn boundary_flips_sign() {
        assert_eq!(resolve_shift(0, 10, 6, -6, |_| unreachable!()), Some(6));
    }

    #[test]
    fn short_video_redraws_from_feasible_set() {
        // 4 frames, frame 1, drawn +5: 6 and -4 both outside; feasible {-1, 1, 2}.
        let picks: Vec<_> = (0..3).map(|k| resolve_shift(1, 4, 6, 5, |_| k)).collect();
        assert_eq!(picks, vec![Some(-1), Some(1), Some(2)]);
        assert_eq!(resolve_shift(0, 1, 6, 1, |_| 0), None);
    }

    #[test]
    fn seventy_five_frame_video_pairs_every_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let plan = plan_frame_shifts(75, 6, &mut rng).unwrap();
        assert_eq!(plan.len(), 75);
        for (k, &(i, a)) in plan.iter().enumerate() {
            assert_eq!(i, k);
            assert!((1..=6).contains(&a.unsigned_abs()));
            assert!((0..75).contains(&(i as i32 + a)));
        }
    }

    #[test]
    fn exhaustive_policy_enumeration() {
        // every (frame, drawn shift) combination of a 75-frame video resolves
        // to an in-range shift of magnitude 1..=6
        for i in 0..75 {
            for drawn in (-6..=6).filter(|&d| d != 0) {
                for k in 0..12 {
                    let s = resolve_shift(i, 75, 6, drawn, |len| k % len).unwrap();
                    assert!((1..=6).contains(&s.abs()));
                    assert!((0..75).contains(&(i + s)));
                }
            }
        }
    }

    #[test]
    fn empty_frames_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            make_frame_pairs(&[], &[], 6, &mut rng),
            Err(MediaError::EmptyFrames)
        ));
        assert!(plan_frame_shifts(5, 0, &mut rng).is_err());
    }

    proptest! {
        #[test]
        fn shifts_valid_and_deterministic(n in 1usize..40, amax in 1usize..=6, seed in any::<u64>()) {
            let a = plan_frame_shifts(n, amax, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = plan_frame_shifts(n, amax, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(&a, &b);
            if n > 1 {
                prop_assert_eq!(a.len(), n);
            }
            for (i, s) in a {
                prop_assert!((1..=amax).contains(&(s.unsigned_abs() as usize)));
                let r = i as i64 + s as i64;
                prop_assert!(r >= 0 && r < n as i64);
            }
        }
    }
}
