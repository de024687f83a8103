//! Acceptance suite: every release-gating property of the renderer and
//! pruning laboratory, one test per criterion, each printing a PASS/FAIL
//! line (visible under `cargo test -- --nocapture`).

use std::panic::AssertUnwindSafe;
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use splatprune_core::image::Image;
use splatprune_core::math::Vec2;
use splatprune_core::metrics::{psnr, ssim};
use splatprune_core::model::{CameraView, Color, GaussianPrimitive, Scene};
use splatprune_core::pruning::{
    apply_mask, prune_cross_ratio, prune_cross_stochastic, prune_cross_threshold, prune_pixelwise,
};
use splatprune_core::rasterizer::{
    record_streams, render, render_oracle, ContributionRecord, ContributionStream,
    RayContributions, RenderOptions,
};
use splatprune_core::scoring::{
    aggregate_cross_view, rank_per_ray, Aggregation, ScoreFunctionId, ScoreOptions,
    ALL_SCORE_FUNCTIONS,
};
use splatprune_core::synthetic::{gen_camera_ring, gen_ground_truth, gen_scene, ShMode, SynthSpec};
use splatprune_core::{with_worker_count, Scene32};

fn criterion(name: &str, budget: Duration, f: impl FnOnce()) {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    match outcome {
        Ok(()) if elapsed <= budget => {
            println!("ACCEPTANCE PASS {name} ({elapsed:.2?})");
        }
        Ok(()) => {
            println!(
                "ACCEPTANCE FAIL {name}: exceeded {budget:.0?} budget (took {elapsed:.2?})"
            );
            panic!("{name} exceeded its runtime budget: {elapsed:.2?} > {budget:.0?}");
        }
        Err(cause) => {
            println!("ACCEPTANCE FAIL {name} ({elapsed:.2?})");
            std::panic::resume_unwind(cause);
        }
    }
}

/// Shared mid-size fixture: installed ground truth, recorded streams, a
/// summed score table, and per-ray rankings.
struct Fixture {
    scene: Scene32,
    cams: Vec<CameraView<f32>>,
    streams: Vec<ContributionStream<f32>>,
    ms_scores: Vec<f32>,
    ranked: splatprune_core::RankedStreams32,
}

static FIXTURE: LazyLock<Fixture> = LazyLock::new(|| {
    let scene = gen_scene::<f32>(&SynthSpec {
        seed: 2024,
        n_primitives: 5000,
        sh_mode: ShMode::FullRandom,
        ..SynthSpec::default()
    })
    .unwrap();
    let mut cams = gen_camera_ring(4, 4.0, splatprune_core::math::Vec3::splat(0.0), (64, 64));
    gen_ground_truth(&scene, &mut cams);
    let opts = RenderOptions::default();
    let streams = record_streams(&scene, &cams, &opts);
    let sopts = ScoreOptions::default();
    let ms_scores = aggregate_cross_view(
        &scene,
        &streams,
        &cams,
        ScoreFunctionId::Ms,
        Aggregation::Sum,
        &sopts,
    )
    .unwrap()
    .per_primitive;
    let ranked = rank_per_ray(&scene, &streams, &cams, ScoreFunctionId::Eg, &sopts).unwrap();
    Fixture {
        scene,
        cams,
        streams,
        ms_scores,
        ranked,
    }
});

fn mean_psnr_vs_ground_truth(scene: &Scene32, cams: &[CameraView<f32>]) -> f64 {
    let opts = RenderOptions::default();
    let mut total = 0.0;
    for cam in cams {
        let image = render(scene, cam, &opts).image;
        total += psnr(&image, cam.ground_truth.as_ref().unwrap()).unwrap();
    }
    total / cams.len() as f64
}

/// Rays that received at least one contribution, as (view, row, col) keys.
fn hit_rays(streams: &[ContributionStream<f32>]) -> std::collections::BTreeSet<(usize, u32, u32)> {
    streams
        .iter()
        .flat_map(|s| {
            s.rays
                .iter()
                .filter(|r| !r.records.is_empty())
                .map(move |r| (s.view_index, r.row, r.col))
        })
        .collect()
}

#[test]
fn tiled_renderer_matches_brute_force_reference() {
    criterion(
        "tiled renderer matches the brute-force reference on 20 random scenes",
        Duration::from_secs(30),
        || {
            let mut worst = 0.0f32;
            for i in 0..20u64 {
                let spec = SynthSpec {
                    seed: 100 + i,
                    n_primitives: (i as usize * 97 + 31) % 512 + 1,
                    sh_mode: if i % 2 == 0 {
                        ShMode::FullRandom
                    } else {
                        ShMode::Band0Only
                    },
                    ..SynthSpec::default()
                };
                let scene = gen_scene::<f32>(&spec).unwrap();
                let cams =
                    gen_camera_ring(3, 3.5, splatprune_core::math::Vec3::splat(0.0), (64, 64));
                let opts = RenderOptions::default();
                for cam in &cams {
                    let fast = render(&scene, cam, &opts).image;
                    let slow = render_oracle(&scene, cam, &opts).image;
                    for (a, b) in fast.data().iter().zip(slow.data()) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
            assert!(
                worst <= 1e-4,
                "max per-channel deviation {worst} exceeds 1e-4"
            );
        },
    );
}

#[test]
fn per_ray_floor_retains_coverage_on_every_hit_ray() {
    criterion(
        "top-1-per-ray pruning keeps every covered ray covered",
        Duration::from_secs(60),
        || {
            let fx = &*FIXTURE;
            let mask = prune_pixelwise(&fx.ranked, 1).unwrap();
            let (pruned, _) = apply_mask(&fx.scene, &mask).unwrap();
            let opts = RenderOptions::default();
            let before = hit_rays(&fx.streams);
            let after = hit_rays(&record_streams(&pruned, &fx.cams, &opts));
            let lost: Vec<_> = before.difference(&after).take(5).collect();
            assert!(
                lost.is_empty(),
                "rays lost all coverage after pruning: {lost:?}"
            );
            let retained = mask.iter().filter(|&&r| r).count();
            assert!(
                retained <= before.len(),
                "retained {retained} primitives but only {} rays have hits",
                before.len()
            );
        },
    );
}

#[test]
fn threshold_sweep_has_no_retention_floor() {
    criterion(
        "raising the score threshold drives retention to zero and quality monotonically down",
        Duration::from_secs(120),
        || {
            let fx = &*FIXTURE;
            let mut sorted = fx.ms_scores.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let max = *sorted.last().unwrap();
            let mut thresholds = vec![0.0f32];
            for k in 1..=9 {
                thresholds.push(sorted[(k * (sorted.len() - 1)) / 10]);
            }
            thresholds.push(max * 1.01 + 1e-3);

            let mut counts = Vec::new();
            let mut quality = Vec::new();
            for &tau in &thresholds {
                let mask = prune_cross_threshold(&fx.ms_scores, tau);
                let (pruned, _) = apply_mask(&fx.scene, &mask).unwrap();
                counts.push(pruned.len());
                quality.push(mean_psnr_vs_ground_truth(&pruned, &fx.cams));
            }
            for pair in counts.windows(2) {
                assert!(pair[1] <= pair[0], "retention rose along the sweep: {counts:?}");
            }
            assert_eq!(*counts.last().unwrap(), 0, "final threshold must prune everything");
            for (i, pair) in quality.windows(2).enumerate() {
                assert!(
                    pair[1] <= pair[0] + 0.1,
                    "PSNR rose by more than 0.1 dB at step {i}: {quality:?}"
                );
            }
            let drop = quality.first().unwrap() - quality.last().unwrap();
            assert!(
                drop >= 3.0,
                "end-to-end PSNR drop {drop:.2} dB is below 3 dB: {quality:?}"
            );
        },
    );
}

#[test]
fn retention_sets_nest_and_ratio_counts_are_exact() {
    criterion(
        "per-ray retain-sets nest in n; ratio pruning hits exact counts on the 5% grid",
        Duration::from_secs(60),
        || {
            let fx = &*FIXTURE;
            let mut previous: Option<Vec<bool>> = None;
            for n in [1u32, 5, 10, 30] {
                let mask = prune_pixelwise(&fx.ranked, n).unwrap();
                if let Some(prev) = &previous {
                    for (id, (&small, &large)) in prev.iter().zip(&mask).enumerate() {
                        assert!(
                            !small | large,
                            "primitive {id} retained at smaller n but dropped at n={n}"
                        );
                    }
                }
                previous = Some(mask);
            }

            let n_total = fx.scene.len();
            for k in 0..=20usize {
                let p = k as f64 / 20.0;
                let mask = prune_cross_ratio(&fx.ms_scores, p).unwrap();
                let retained = mask.iter().filter(|&&r| r).count();
                let expected = n_total - (k * n_total) / 20;
                assert_eq!(retained, expected, "p = {p}");
            }
        },
    );
}

#[test]
fn score_families_obey_their_orderings() {
    criterion(
        "max-aggregated scores never exceed sums; color gating never raises a weight",
        Duration::from_secs(30),
        || {
            let sopts = ScoreOptions::default();
            for i in 0..10u64 {
                let scene = gen_scene::<f32>(&SynthSpec {
                    seed: 500 + i,
                    n_primitives: 150 + (i as usize * 37) % 200,
                    sh_mode: ShMode::FullRandom,
                    ..SynthSpec::default()
                })
                .unwrap();
                let mut cams = gen_camera_ring(
                    1 + (i as usize) % 2,
                    3.5,
                    splatprune_core::math::Vec3::splat(0.0),
                    (32, 32),
                );
                gen_ground_truth(&scene, &mut cams);
                let streams = record_streams(&scene, &cams, &RenderOptions::default());

                let ms = aggregate_cross_view(
                    &scene,
                    &streams,
                    &cams,
                    ScoreFunctionId::Ms,
                    Aggregation::Sum,
                    &sopts,
                )
                .unwrap()
                .per_primitive;
                let rs = aggregate_cross_view(
                    &scene,
                    &streams,
                    &cams,
                    ScoreFunctionId::Rs,
                    Aggregation::Max,
                    &sopts,
                )
                .unwrap()
                .per_primitive;
                for (id, (&r, &m)) in rs.iter().zip(&ms).enumerate() {
                    assert!(r <= m, "stream {i}: primitive {id} has max {r} > sum {m}");
                }

                let eg = rank_per_ray(&scene, &streams, &cams, ScoreFunctionId::Eg, &sopts).unwrap();
                let v13 =
                    rank_per_ray(&scene, &streams, &cams, ScoreFunctionId::V13, &sopts).unwrap();
                let v3 = rank_per_ray(&scene, &streams, &cams, ScoreFunctionId::V3, &sopts).unwrap();
                for (ve, (vv, v3v)) in eg.views.iter().zip(v13.views.iter().zip(&v3.views)) {
                    for (re, (rv, r3)) in ve.rays.iter().zip(vv.rays.iter().zip(&v3v.rays)) {
                        let by_id = |ray: &splatprune_core::scoring::RankedRay<f32>| {
                            ray.entries
                                .iter()
                                .map(|e| (e.primitive_id, e.score))
                                .collect::<std::collections::BTreeMap<_, _>>()
                        };
                        let eg_scores = by_id(re);
                        for (id, s13) in by_id(rv) {
                            assert!(
                                s13 <= eg_scores[&id],
                                "color-gated weight exceeded the raw weight for primitive {id}"
                            );
                        }
                        for (id, s3) in by_id(r3) {
                            let diff = (s3 as f64 - eg_scores[&id] as f64).abs();
                            assert!(diff <= 1e-9, "primitive {id}: |v3 - eg| = {diff}");
                        }
                    }
                }

                for function in ALL_SCORE_FUNCTIONS {
                    let ranked =
                        rank_per_ray(&scene, &streams, &cams, function, &sopts).unwrap();
                    for view in &ranked.views {
                        for ray in &view.rays {
                            for e in &ray.entries {
                                assert!(
                                    (0.0..=1.0).contains(&e.score),
                                    "{function} produced {} outside [0,1]",
                                    e.score
                                );
                            }
                        }
                    }
                }
            }
        },
    );
}

#[test]
fn four_primitive_worked_example_reproduces_exactly() {
    criterion(
        "the 4-primitive 3-ray worked example: per-ray floor keeps 3 of 4, threshold keeps 1",
        Duration::from_secs(1),
        || {
            // Four primitives G1..G4 (ids 0..3) seen by three rays. Each
            // ray's records form a consistent front-to-back chain.
            let mut prims = vec![GaussianPrimitive::<f64>::unit(); 4];
            for (i, p) in prims.iter_mut().enumerate() {
                p.position.x = i as f64;
            }
            let scene = Scene::new(prims, "worked-example");
            let chain = |records: Vec<(usize, f64, f64)>| {
                records
                    .into_iter()
                    .map(|(id, alpha, t)| ContributionRecord {
                        primitive_id: id,
                        alpha,
                        transmittance_before: t,
                        weight: alpha * t,
                        color: Color::splat(0.5),
                    })
                    .collect::<Vec<_>>()
            };
            let stream = ContributionStream {
                view_index: 0,
                width: 4,
                height: 4,
                rays: vec![
                    RayContributions {
                        row: 0,
                        col: 0,
                        records: chain(vec![(1, 0.5, 1.0), (3, 0.6, 0.5), (0, 0.5, 0.2)]),
                    },
                    RayContributions {
                        row: 0,
                        col: 1,
                        records: chain(vec![(3, 0.45, 1.0)]),
                    },
                    RayContributions {
                        row: 0,
                        col: 2,
                        records: chain(vec![(2, 0.5, 1.0), (3, 0.6, 0.5)]),
                    },
                ],
                mean2d: vec![Some(Vec2::new(2.0, 0.5)); 4],
            };
            let view = CameraView::<f64> {
                width: 4,
                height: 4,
                fx: 4.0,
                fy: 4.0,
                cx: 2.0,
                cy: 2.0,
                rotation: splatprune_core::math::Mat3::identity(),
                translation: splatprune_core::math::Vec3::splat(0.0),
                name: "figure".into(),
                ground_truth: None,
            };
            let sopts = ScoreOptions::default();

            // Summed contribution scores: G1 = 0.1, G2 = 0.5, G3 = 0.5,
            // G4 = 0.3 + 0.45 + 0.3 = 1.05.
            let table = aggregate_cross_view(
                &scene,
                std::slice::from_ref(&stream),
                std::slice::from_ref(&view),
                ScoreFunctionId::Ms,
                Aggregation::Sum,
                &sopts,
            )
            .unwrap();
            let expect = [0.1, 0.5, 0.5, 1.05];
            for (id, (&got, want)) in table.per_primitive.iter().zip(expect).enumerate() {
                assert!(
                    (got - want).abs() < 1e-12,
                    "G{}: score {got}, expected {want}",
                    id + 1
                );
            }

            // Per-ray floor with n = 1 keeps the top contributor of each
            // ray: G2, G4, G3 — three of the four primitives.
            let ranked = rank_per_ray(
                &scene,
                std::slice::from_ref(&stream),
                std::slice::from_ref(&view),
                ScoreFunctionId::Eg,
                &sopts,
            )
            .unwrap();
            let mask = prune_pixelwise(&ranked, 1).unwrap();
            assert_eq!(mask, vec![false, true, true, true]);

            // An aggressive cross-view threshold keeps only G4.
            let mask_threshold = prune_cross_threshold(&table.per_primitive, 0.75);
            assert_eq!(mask_threshold, vec![false, false, false, true]);

            // Applying the per-ray mask preserves order and reports the
            // id remapping.
            let (pruned, mapping) = apply_mask(&scene, &mask).unwrap();
            let xs: Vec<f64> = pruned.primitives.iter().map(|p| p.position.x).collect();
            assert_eq!(xs, vec![1.0, 2.0, 3.0]);
            assert_eq!(mapping, vec![None, Some(0), Some(1), Some(2)]);
        },
    );
}

#[test]
fn outputs_are_bit_identical_across_workers_and_reruns() {
    criterion(
        "renders, score tables, and masks are bit-identical across worker counts and reruns",
        Duration::from_secs(120),
        || {
            let spec = SynthSpec {
                seed: 777,
                n_primitives: 2000,
                sh_mode: ShMode::FullRandom,
                ..SynthSpec::default()
            };
            let image_bits = |img: &Image<f32>| -> Vec<u32> {
                img.data().iter().map(|v| v.to_bits()).collect()
            };
            let run = |workers: usize| {
                with_worker_count(workers, || {
                    let scene = gen_scene::<f32>(&spec).unwrap();
                    let mut cams = gen_camera_ring(
                        2,
                        4.0,
                        splatprune_core::math::Vec3::splat(0.0),
                        (64, 64),
                    );
                    gen_ground_truth(&scene, &mut cams);
                    let opts = RenderOptions::default();
                    let renders: Vec<Vec<u32>> = cams
                        .iter()
                        .map(|c| image_bits(&render(&scene, c, &opts).image))
                        .collect();
                    let streams = record_streams(&scene, &cams, &opts);
                    let sopts = ScoreOptions::default();
                    let table = aggregate_cross_view(
                        &scene,
                        &streams,
                        &cams,
                        ScoreFunctionId::V13,
                        Aggregation::Sum,
                        &sopts,
                    )
                    .unwrap();
                    let score_bits: Vec<u32> =
                        table.per_primitive.iter().map(|v| v.to_bits()).collect();
                    let ranked =
                        rank_per_ray(&scene, &streams, &cams, ScoreFunctionId::Eg, &sopts)
                            .unwrap();
                    let ratio = prune_cross_ratio(&table.per_primitive, 0.45).unwrap();
                    let stochastic =
                        prune_cross_stochastic(&table.per_primitive, 0.45, 4242).unwrap();
                    let pixelwise = prune_pixelwise(&ranked, 2).unwrap();
                    (renders, score_bits, ratio, stochastic, pixelwise)
                })
            };
            let reference = run(1);
            for workers in [2usize, 8] {
                let other = run(workers);
                assert_eq!(
                    other, reference,
                    "outputs changed with {workers} workers"
                );
            }
            let rerun = run(1);
            assert_eq!(rerun, reference, "identical seeds produced different outputs");
        },
    );
}

#[test]
fn checkpoint_and_image_round_trips_are_byte_identical() {
    criterion(
        "100 PLY and 100 PNG round trips reproduce files byte for byte",
        Duration::from_secs(30),
        || {
            use rand::{Rng, SeedableRng};
            let dir = tempfile::tempdir().unwrap();
            for i in 0..100u64 {
                let scene = gen_scene::<f32>(&SynthSpec {
                    seed: 9000 + i,
                    n_primitives: (i as usize * 13) % 40 + 1,
                    sh_mode: ShMode::FullRandom,
                    ..SynthSpec::default()
                })
                .unwrap();
                let p1 = dir.path().join(format!("s{i}.ply"));
                let p2 = dir.path().join(format!("s{i}b.ply"));
                splatprune_core::io::write_ply(&scene, &p1).unwrap();
                let loaded = splatprune_core::io::read_ply::<f32>(&p1).unwrap();
                splatprune_core::io::write_ply(&loaded, &p2).unwrap();
                assert_eq!(
                    std::fs::read(&p1).unwrap(),
                    std::fs::read(&p2).unwrap(),
                    "checkpoint {i} failed its round trip"
                );
            }
            for i in 0..100u64 {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(30_000 + i);
                let img = Image::<f32>::from_fn(
                    8 + (i as u32 % 25),
                    8 + (i as u32 % 17),
                    |_, _| Color::new(rng.random(), rng.random(), rng.random()),
                );
                let p1 = dir.path().join(format!("i{i}.png"));
                let p2 = dir.path().join(format!("i{i}b.png"));
                splatprune_core::io::write_image(&img, &p1).unwrap();
                let loaded = splatprune_core::io::read_image::<f32>(&p1).unwrap();
                splatprune_core::io::write_image(&loaded, &p2).unwrap();
                assert_eq!(
                    std::fs::read(&p1).unwrap(),
                    std::fs::read(&p2).unwrap(),
                    "image {i} failed its round trip"
                );
            }
        },
    );
}

#[test]
fn metric_definitions_are_anchored() {
    criterion(
        "PSNR and SSIM reproduce their defining values at tight tolerances",
        Duration::from_secs(30),
        || {
            let a = Image::<f64>::filled(32, 32, Color::new(0.2, 0.45, 0.7));
            let b = Image::<f64>::filled(32, 32, Color::new(0.3, 0.55, 0.8));
            let p = psnr(&a, &b).unwrap();
            assert!(
                (p - 20.0).abs() <= 1e-9,
                "uniform 0.1 offset gave {p} dB, expected 20 within 1e-9"
            );
            let mut rng = {
                use rand::SeedableRng;
                rand_chacha::ChaCha8Rng::seed_from_u64(5)
            };
            let textured = Image::<f64>::from_fn(24, 24, |_, _| {
                use rand::Rng;
                Color::new(rng.random(), rng.random(), rng.random())
            });
            let s = ssim(&textured, &textured).unwrap();
            assert!(
                (s - 1.0).abs() <= 1e-12,
                "self-similarity gave {s}, expected 1 within 1e-12"
            );
        },
    );
}
