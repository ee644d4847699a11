mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use evatlas_core::layout::{Rect, Size, MIN_RADIUS_FRACTION};
use evatlas_core::{compute_layout, minimap_frame, parse_corpus, EvidenceAtlas, IngestConfig, LayoutConfig, MapLayout};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn atlas(seed: u64, rows: usize) -> EvidenceAtlas {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (corpus, _) = parse_corpus(&common::random_csv(&mut rng, rows), &IngestConfig::default()).unwrap();
    let (model, table) = common::random_model(&mut rng, &corpus);
    EvidenceAtlas::build(Arc::new(corpus), model, table).unwrap()
}

/// Checks disjointness with the gap, containment in the canvas, nodes
/// inside their cluster, and area proportional to count where the minimum
/// radius does not bind.
fn check(layout: &MapLayout, total: usize) -> Result<(), TestCaseError> {
    let canvas = layout.canvas;
    let gap = layout.gap();
    let floor = MIN_RADIUS_FRACTION * canvas.min_side();
    let cs = &layout.clusters;
    for (i, a) in cs.iter().enumerate() {
        prop_assert!(a.x - a.radius >= -1e-9 && a.x + a.radius <= canvas.width + 1e-9);
        prop_assert!(a.y - a.radius >= -1e-9 && a.y + a.radius <= canvas.height + 1e-9);
        for b in &cs[i + 1..] {
            let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
            prop_assert!(d >= a.radius + b.radius + gap, "{} and {} overlap", a.topic_id, b.topic_id);
        }
    }
    let by_topic: BTreeMap<&str, _> = cs.iter().map(|c| (c.topic_id.as_str(), c)).collect();
    prop_assert_eq!(layout.nodes.len(), total);
    for n in &layout.nodes {
        let c = by_topic[n.topic_id.as_str()];
        let d = ((n.x - c.x).powi(2) + (n.y - c.y).powi(2)).sqrt();
        prop_assert!(d + n.radius <= c.radius + 1e-9, "node {} leaves its cluster", n.study_id);
    }
    let free: Vec<_> = cs.iter().filter(|c| c.radius > floor).collect();
    for a in &free {
        for b in &free {
            let area_ratio = (a.radius / b.radius).powi(2);
            let count_ratio = a.count as f64 / b.count as f64;
            prop_assert!((area_ratio / count_ratio - 1.0).abs() <= 0.01);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn layout_invariants(
        data_seed in any::<u64>(),
        rows in 1usize..150,
        layout_seed in any::<u64>(),
        width in 300.0f64..2000.0,
        aspect in 0.5f64..2.0,
    ) {
        let atlas = atlas(data_seed, rows);
        let config = LayoutConfig { seed: layout_seed, canvas: Size::new(width, width * aspect) };
        let layout = compute_layout(&atlas, &config).unwrap();
        check(&layout, atlas.len())?;
        prop_assert_eq!(compute_layout(&atlas, &config).unwrap(), layout);
    }

    #[test]
    fn minimap_frame_scales_and_clamps(
        x in -500.0f64..1500.0, y in -500.0f64..1500.0,
        w in 1.0f64..1500.0, h in 1.0f64..1500.0,
    ) {
        let layout = compute_layout(&atlas(1, 10), &LayoutConfig::default()).unwrap();
        let mini = Size::new(150.0, 150.0);
        let f = minimap_frame(&layout, Rect { x, y, width: w, height: h }, mini);
        prop_assert!(f.x >= 0.0 && f.y >= 0.0 && f.width >= 0.0 && f.height >= 0.0);
        prop_assert!(f.x + f.width <= 150.0 + 1e-9 && f.y + f.height <= 150.0 + 1e-9);
        if x >= 0.0 && y >= 0.0 && x + w <= 1000.0 && y + h <= 1000.0 {
            prop_assert!((f.x - 0.15 * x).abs() < 1e-9 && (f.width - 0.15 * w).abs() < 1e-9);
        }
    }
}

#[test]
fn seeds_rotate_but_keep_radii() {
    let atlas = atlas(9, 60);
    let a = compute_layout(&atlas, &LayoutConfig { seed: 1, ..LayoutConfig::default() }).unwrap();
    let b = compute_layout(&atlas, &LayoutConfig { seed: 2, ..LayoutConfig::default() }).unwrap();
    assert_ne!(a.nodes, b.nodes);
    let radii = |l: &MapLayout| l.clusters.iter().map(|c| (c.topic_id.clone(), c.radius)).collect::<Vec<_>>();
    assert_eq!(radii(&a), radii(&b));
}

#[test]
fn unusable_canvas_is_an_error() {
    let atlas = atlas(2, 30);
    for canvas in [Size::new(0.0, 100.0), Size::new(f64::NAN, 100.0), Size::new(-5.0, 10.0)] {
        let config = LayoutConfig { seed: 0, canvas };
        assert!(compute_layout(&atlas, &config).is_err());
    }
}

#[test]
fn many_small_topics_still_pack() {
    use evatlas_core::topic::{Assignment, RunMeta, Topic};
    use evatlas_core::{AssignmentTable, RunConfig, TopicModel};

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (corpus, _) = parse_corpus(&common::random_csv(&mut rng, 400), &IngestConfig::default()).unwrap();
    let k = 40;
    let model = TopicModel {
        topics: (0..k)
            .map(|i| Topic {
                topic_id: format!("T{:02}", i + 1),
                label: String::new(),
                description: String::new(),
                subtopics: Vec::new(),
                palette_index: i as u32,
            })
            .collect(),
        run_meta: RunMeta::from_config(&RunConfig::default()),
    };
    // Skewed sizes: topic i gets roughly 1/(i+1) of the studies.
    let weights: Vec<f64> = (0..k).map(|i| 1.0 / (i as f64 + 1.0)).collect();
    let total: f64 = weights.iter().sum();
    let assignments = corpus
        .studies
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let u = (n as f64 + 0.5) / corpus.studies.len() as f64 * total;
            let mut acc = 0.0;
            let t = weights.iter().position(|w| {
                acc += w;
                u < acc
            });
            Assignment {
                study_id: s.id.clone(),
                topic_id: format!("T{:02}", t.unwrap_or(k - 1) + 1),
                subtopic_id: None,
                score: 1.0,
                alternates: Vec::new(),
            }
        })
        .collect();
    let atlas = EvidenceAtlas::build(Arc::new(corpus), model, AssignmentTable { assignments }).unwrap();
    for seed in 0..5 {
        let layout = compute_layout(&atlas, &LayoutConfig { seed, ..LayoutConfig::default() }).unwrap();
        check(&layout, 400).unwrap();
    }
}
