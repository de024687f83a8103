//! Pruning operators over score tables and per-ray rankings: deterministic
//! ratio and threshold cuts, score-proportional stochastic sampling, and the
//! pixel-wise top-k safeguard, plus mask application to a scene.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Scene;
use crate::scalar::Scalar;
use crate::scoring::{RankedStreams, ScoreFunctionId};

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("prune ratio must lie in [0, 1], got {0}")]
    InvalidRatio(f64),
    #[error("mask has {mask} entries but the scene has {scene} primitives")]
    LengthMismatch { mask: usize, scene: usize },
    #[error("ranking references primitive id {id} but only {known} primitives are known")]
    PrimitiveOutOfRange { id: usize, known: usize },
}

/// A pruning operator and its setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "technique", content = "value", rename_all = "snake_case")]
pub enum PruneTechnique {
    /// Remove the lowest-scoring fraction of primitives.
    CrossRatio(f64),
    /// Retain primitives scoring at or above the threshold.
    CrossThreshold(f64),
    /// Sample retentions with probability proportional to score.
    CrossStochastic(f64),
    /// Retain the top-k contributors of every ray.
    PixelwiseTopk(u32),
}

/// Provenance of a pruning mask, stored alongside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneSpec {
    #[serde(flatten)]
    pub technique: PruneTechnique,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub score_function: ScoreFunctionId,
}

/// Retention flags aligned with scene primitive ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PruneMask {
    pub retain: Vec<bool>,
    pub spec: PruneSpec,
}

impl PruneMask {
    pub fn retained_count(&self) -> usize {
        self.retain.iter().filter(|&&r| r).count()
    }
}

fn validate_ratio(p: f64) -> Result<(), PruneError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(PruneError::InvalidRatio(p))
    }
}

fn prune_count(p: f64, n: usize) -> usize {
    ((p * n as f64).floor() as usize).min(n)
}

/// Prunes exactly `floor(p * N)` primitives, lowest scores first. Ties are
/// broken by pruning the higher id first.
pub fn prune_cross_ratio<T: Scalar>(scores: &[T], p: f64) -> Result<Vec<bool>, PruneError> {
    validate_ratio(p)?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        scores[i]
            .partial_cmp(&scores[j])
            .expect("finite scores")
            .then(j.cmp(&i))
    });
    let mut retain = vec![true; n];
    for &id in order.iter().take(prune_count(p, n)) {
        retain[id] = false;
    }
    Ok(retain)
}

/// Retains a primitive iff its score is at or above the threshold.
pub fn prune_cross_threshold<T: Scalar>(scores: &[T], threshold: T) -> Vec<bool> {
    scores.iter().map(|&s| s >= threshold).collect()
}

/// Keeps `N - floor(p * N)` primitives, sampled without replacement with
/// probability proportional to score. Uses exponential race keys
/// `ln(u) / score` (one uniform draw per primitive, in id order, always in
/// f64), retaining the largest keys. Zero-score primitives rank after every
/// positive-score primitive, in ascending id order.
pub fn prune_cross_stochastic<T: Scalar>(
    scores: &[T],
    p: f64,
    seed: u64,
) -> Result<Vec<bool>, PruneError> {
    validate_ratio(p)?;
    let n = scores.len();
    let keep = n - prune_count(p, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(usize, f64)> = Vec::new();
    let mut zeros: Vec<usize> = Vec::new();
    for (id, &s) in scores.iter().enumerate() {
        let mut u: f64 = rng.random();
        if u == 0.0 {
            u = f64::MIN_POSITIVE;
        }
        let w = s.widen();
        if w > 0.0 {
            keyed.push((id, u.ln() / w));
        } else {
            zeros.push(id);
        }
    }
    keyed.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite keys")
            .then(a.0.cmp(&b.0))
    });
    let mut retain = vec![false; n];
    for &(id, _) in keyed.iter().take(keep) {
        retain[id] = true;
    }
    for &id in zeros.iter().take(keep.saturating_sub(keyed.len())) {
        retain[id] = true;
    }
    Ok(retain)
}

/// Retains the union, over every ray of every view, of each ray's top
/// `min(n, hits)` ranked contributors. Primitives recorded on no ray are
/// pruned.
pub fn prune_pixelwise<T: Scalar>(
    ranked: &RankedStreams<T>,
    n: u32,
) -> Result<Vec<bool>, PruneError> {
    let mut retain = vec![false; ranked.n_primitives];
    for view in &ranked.views {
        for ray in &view.rays {
            for entry in ray.entries.iter().take(n as usize) {
                let id = entry.primitive_id;
                if id >= retain.len() {
                    return Err(PruneError::PrimitiveOutOfRange {
                        id,
                        known: retain.len(),
                    });
                }
                retain[id] = true;
            }
        }
    }
    Ok(retain)
}

/// Drops pruned primitives, preserving relative order, and reports where
/// each old id ended up (`None` when pruned).
pub fn apply_mask<T: Scalar>(
    scene: &Scene<T>,
    retain: &[bool],
) -> Result<(Scene<T>, Vec<Option<usize>>), PruneError> {
    if retain.len() != scene.len() {
        return Err(PruneError::LengthMismatch {
            mask: retain.len(),
            scene: scene.len(),
        });
    }
    let mut mapping = vec![None; scene.len()];
    let mut kept = Vec::with_capacity(retain.iter().filter(|&&r| r).count());
    for (old, prim) in scene.primitives.iter().enumerate() {
        if retain[old] {
            mapping[old] = Some(kept.len());
            kept.push(prim.clone());
        }
    }
    Ok((Scene::new(kept, scene.source_tag.clone()), mapping))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianPrimitive;
    use crate::scoring::{RankedEntry, RankedRay, RankedView};

    fn retained_ids(mask: &[bool]) -> Vec<usize> {
        mask.iter()
            .enumerate()
            .filter_map(|(i, &r)| r.then_some(i))
            .collect()
    }

    #[test]
    fn ratio_prunes_exactly_the_floor_count() {
        // Ten distinct scores; p = 0.6 prunes floor(6) = 6, keeping the top 4.
        let scores: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let mask = prune_cross_ratio(&scores, 0.6).unwrap();
        assert_eq!(retained_ids(&mask), vec![6, 7, 8, 9]);
    }

    #[test]
    fn ratio_extremes() {
        let scores = vec![0.3f64, 0.1, 0.2];
        let all = prune_cross_ratio(&scores, 0.0).unwrap();
        assert!(all.iter().all(|&r| r));
        let none = prune_cross_ratio(&scores, 1.0).unwrap();
        assert!(none.iter().all(|&r| !r));
        assert!(prune_cross_ratio(&scores, 1.5).is_err());
        assert!(prune_cross_ratio(&scores, -0.1).is_err());
        assert!(prune_cross_ratio(&scores, f64::NAN).is_err());
    }

    #[test]
    fn ratio_ties_prune_the_higher_id_first() {
        let scores = vec![0.5f64, 0.5, 0.9, 0.5];
        let mask = prune_cross_ratio(&scores, 0.25).unwrap(); // prunes 1
        assert_eq!(retained_ids(&mask), vec![0, 1, 2]);
        let mask = prune_cross_ratio(&scores, 0.5).unwrap(); // prunes 2
        assert_eq!(retained_ids(&mask), vec![0, 2]);
        let mask = prune_cross_ratio(&scores, 0.75).unwrap(); // prunes 3
        assert_eq!(retained_ids(&mask), vec![2]);
    }

    #[test]
    fn ratio_count_is_exact_on_a_five_percent_grid() {
        let n = 40;
        let scores: Vec<f64> = (0..n).map(|i| (i * 7 % 13) as f64).collect();
        for k in 0..=20u64 {
            let p = k as f64 / 20.0;
            let mask = prune_cross_ratio(&scores, p).unwrap();
            let retained = mask.iter().filter(|&&r| r).count();
            // floor(k/20 * 40) = 2k exactly.
            assert_eq!(retained, n - 2 * k as usize, "p = {p}");
        }
    }

    #[test]
    fn ratio_masks_nest_as_the_ratio_grows() {
        let scores: Vec<f64> = (0..25).map(|i| ((i * 11) % 7) as f64 * 0.1).collect();
        let mut prev = prune_cross_ratio(&scores, 0.0).unwrap();
        for k in 1..=20 {
            let mask = prune_cross_ratio(&scores, k as f64 / 20.0).unwrap();
            for (now, before) in mask.iter().zip(&prev) {
                assert!(!now | before, "retention must shrink monotonically");
            }
            prev = mask;
        }
    }

    #[test]
    fn ratio_is_invariant_under_monotone_score_transforms() {
        let scores: Vec<f64> = vec![0.9, 0.03, 0.55, 0.2, 0.2, 0.7, 0.0, 1.3];
        let doubled: Vec<f64> = scores.iter().map(|s| 2.0 * s + 1.0).collect();
        let squared: Vec<f64> = scores.iter().map(|s| s * s).collect();
        for k in 0..=8 {
            let p = k as f64 / 8.0;
            let base = prune_cross_ratio(&scores, p).unwrap();
            assert_eq!(base, prune_cross_ratio(&doubled, p).unwrap());
            assert_eq!(base, prune_cross_ratio(&squared, p).unwrap());
        }
    }

    #[test]
    fn threshold_retains_at_or_above() {
        let scores = vec![0.1f64, 0.75, 0.9];
        assert_eq!(
            prune_cross_threshold(&scores, 0.75),
            vec![false, true, true]
        );
        assert_eq!(
            prune_cross_threshold(&scores, 0.0),
            vec![true, true, true]
        );
        assert_eq!(
            prune_cross_threshold(&scores, 2.0),
            vec![false, false, false]
        );
    }

    #[test]
    fn stochastic_keeps_the_exact_complement_count() {
        let scores: Vec<f64> = (1..=17).map(|i| i as f64).collect();
        for k in 0..=20u64 {
            let p = k as f64 / 20.0;
            let mask = prune_cross_stochastic(&scores, p, 7).unwrap();
            let expected = 17 - (p * 17.0).floor() as usize;
            assert_eq!(mask.iter().filter(|&&r| r).count(), expected, "p = {p}");
        }
    }

    #[test]
    fn stochastic_is_deterministic_per_seed() {
        let scores: Vec<f64> = (1..=30).map(|i| (i as f64).sqrt()).collect();
        let a = prune_cross_stochastic(&scores, 0.5, 42).unwrap();
        let b = prune_cross_stochastic(&scores, 0.5, 42).unwrap();
        assert_eq!(a, b);
        let differing = (0..1000u64)
            .map(|s| prune_cross_stochastic(&scores, 0.5, s).unwrap())
            .filter(|m| *m != a)
            .count();
        assert!(differing > 900, "seed should drive the sample");
    }

    #[test]
    fn stochastic_retention_is_uniform_for_uniform_scores() {
        // Equal scores, keep 4 of 8: each id should be retained in half the
        // trials, within 3 sigma of the binomial spread.
        let scores = vec![1.0f64; 8];
        let trials = 10_000u64;
        let mut counts = [0u64; 8];
        for seed in 0..trials {
            let mask = prune_cross_stochastic(&scores, 0.5, seed).unwrap();
            for (id, &r) in mask.iter().enumerate() {
                counts[id] += r as u64;
            }
        }
        let expected = trials as f64 * 0.5;
        let sigma = (trials as f64 * 0.25).sqrt();
        for (id, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expected).abs() < 3.0 * sigma,
                "id {id} retained {c} times, expected {expected} +- {}",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn stochastic_mass_concentration_always_keeps_the_dominant_primitive() {
        let scores = vec![1e-9f64, 1e9, 1e-9, 1e-9, 1e-9];
        for seed in 0..200 {
            let mask = prune_cross_stochastic(&scores, 0.8, seed).unwrap();
            assert_eq!(mask.iter().filter(|&&r| r).count(), 1);
            assert!(mask[1], "seed {seed} dropped the dominant primitive");
        }
    }

    #[test]
    fn stochastic_zero_scores_are_sampled_last() {
        let scores = vec![0.0f64, 1.0, 0.0, 1.0];
        for seed in 0..50 {
            // Keep 2: always the positive-score pair.
            let mask = prune_cross_stochastic(&scores, 0.5, seed).unwrap();
            assert_eq!(mask, vec![false, true, false, true]);
            // Keep 3: the zero-score primitive with the lower id joins.
            let mask = prune_cross_stochastic(&scores, 0.25, seed).unwrap();
            assert_eq!(mask, vec![true, true, false, true]);
        }
    }

    fn ranked_fixture() -> RankedStreams<f64> {
        // Ray (0,0): ids 2 (0.5), 4 (0.3), 1 (0.1).
        // Ray (0,1): ids 3 (0.5), 4 (0.3).
        // Primitive 0 is never recorded.
        let entry = |id, score| RankedEntry {
            primitive_id: id,
            score,
        };
        RankedStreams {
            function: ScoreFunctionId::Eg,
            n_primitives: 5,
            views: vec![RankedView {
                view_index: 0,
                rays: vec![
                    RankedRay {
                        row: 0,
                        col: 0,
                        entries: vec![entry(2, 0.5), entry(4, 0.3), entry(1, 0.1)],
                    },
                    RankedRay {
                        row: 0,
                        col: 1,
                        entries: vec![entry(3, 0.5), entry(4, 0.3)],
                    },
                ],
            }],
        }
    }

    #[test]
    fn pixelwise_takes_the_union_of_per_ray_winners() {
        let ranked = ranked_fixture();
        assert_eq!(retained_ids(&prune_pixelwise(&ranked, 1).unwrap()), vec![2, 3]);
        assert_eq!(
            retained_ids(&prune_pixelwise(&ranked, 2).unwrap()),
            vec![2, 3, 4]
        );
        // n beyond the deepest ray saturates at every recorded primitive.
        for n in [3, 7, 1000] {
            assert_eq!(
                retained_ids(&prune_pixelwise(&ranked, n).unwrap()),
                vec![1, 2, 3, 4]
            );
        }
        // n = 0 retains nothing.
        assert!(retained_ids(&prune_pixelwise(&ranked, 0).unwrap()).is_empty());
    }

    #[test]
    fn pixelwise_masks_nest_as_n_grows() {
        let ranked = ranked_fixture();
        let mut prev = prune_pixelwise(&ranked, 0).unwrap();
        for n in 1..=5 {
            let mask = prune_pixelwise(&ranked, n).unwrap();
            for (before, now) in prev.iter().zip(&mask) {
                assert!(!before | now, "retention must grow with n");
            }
            prev = mask;
        }
    }

    #[test]
    fn pixelwise_rejects_out_of_range_ids() {
        let mut ranked = ranked_fixture();
        ranked.n_primitives = 3;
        assert!(matches!(
            prune_pixelwise(&ranked, 2),
            Err(PruneError::PrimitiveOutOfRange { id: 4, known: 3 })
        ));
    }

    #[test]
    fn apply_mask_preserves_order_and_reports_the_mapping() {
        let prims: Vec<GaussianPrimitive<f64>> = (0..5)
            .map(|i| {
                let mut p = GaussianPrimitive::unit();
                p.position.x = i as f64;
                p
            })
            .collect();
        let scene = Scene::new(prims, "masked");
        let retain = vec![false, true, true, false, true];
        let (pruned, mapping) = apply_mask(&scene, &retain).unwrap();
        assert_eq!(pruned.len(), 3);
        let xs: Vec<f64> = pruned.primitives.iter().map(|p| p.position.x).collect();
        assert_eq!(xs, vec![1.0, 2.0, 4.0]);
        assert_eq!(mapping, vec![None, Some(0), Some(1), None, Some(2)]);
        assert_eq!(pruned.source_tag, "masked");

        let (same, identity) = apply_mask(&scene, &[true; 5]).unwrap();
        assert_eq!(same.len(), 5);
        assert_eq!(identity, (0..5).map(Some).collect::<Vec<_>>());
    }

    #[test]
    fn apply_mask_rejects_length_mismatch() {
        let scene = Scene::new(vec![GaussianPrimitive::<f64>::unit(); 3], "s");
        assert!(matches!(
            apply_mask(&scene, &[true, false]),
            Err(PruneError::LengthMismatch { mask: 2, scene: 3 })
        ));
    }

    #[test]
    fn technique_serialization_shape_is_stable() {
        let spec = PruneSpec {
            technique: PruneTechnique::CrossRatio(0.6),
            seed: None,
            score_function: ScoreFunctionId::Ms,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            json,
            r#"{"technique":"cross_ratio","value":0.6,"score_function":"ms"}"#
        );
        let back: PruneSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);

        let stoch = PruneSpec {
            technique: PruneTechnique::CrossStochastic(0.25),
            seed: Some(9),
            score_function: ScoreFunctionId::V13,
        };
        let json = serde_json::to_string(&stoch).unwrap();
        let back: PruneSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, stoch);
        assert!(json.contains(r#""seed":9"#));

        let topk: PruneSpec = serde_json::from_str(
            r#"{"technique":"pixelwise_topk","value":3,"score_function":"eg"}"#,
        )
        .unwrap();
        assert_eq!(topk.technique, PruneTechnique::PixelwiseTopk(3));
    }
}
