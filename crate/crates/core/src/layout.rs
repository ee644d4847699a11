//! Deterministic map layout: topic circles on an Archimedean spiral, study
//! nodes packed inside them by phyllotaxis, and minimap geometry.
//!
//! Coordinates are abstract units, origin at the canvas top-left, y down.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlas::EvidenceAtlas;
use crate::topic::UNCLASSIFIED_ID;

/// Largest cluster radius as a fraction of the smaller canvas side.
pub const BASE_RADIUS_FRACTION: f64 = 0.25;
/// Smallest cluster radius as a fraction of the smaller canvas side.
pub const MIN_RADIUS_FRACTION: f64 = 0.02;
/// Clearance between clusters as a fraction of the smaller canvas side.
pub const GAP_FRACTION: f64 = 0.01;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;
const SPIRAL_STEP: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("canvas {width}x{height} cannot hold the clusters without overlap")]
    CanvasTooSmall { width: f64, height: f64 },
    #[error("canvas dimensions must be positive and finite")]
    InvalidCanvas,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Size {
    pub width: f64,
    pub height: f64,
}

impl Size {
    pub const fn new(width: f64, height: f64) -> Self {
        Self { width, height }
    }

    pub fn min_side(&self) -> f64 {
        self.width.min(self.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub seed: u64,
    pub canvas: Size,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            canvas: Size::new(1000.0, 1000.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterCircle {
    pub topic_id: String,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePosition {
    pub study_id: String,
    pub topic_id: String,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapLayout {
    pub canvas: Size,
    pub clusters: Vec<ClusterCircle>,
    pub nodes: Vec<NodePosition>,
    pub seed: u64,
}

impl MapLayout {
    pub fn gap(&self) -> f64 {
        GAP_FRACTION * self.canvas.min_side()
    }
}

/// Radius for a cluster of `count` studies out of `total`: area is
/// proportional to the count, floored at the minimum radius.
pub fn cluster_radius(count: usize, total: usize, canvas: Size) -> f64 {
    let min_side = canvas.min_side();
    let base = BASE_RADIUS_FRACTION * min_side;
    let floor = MIN_RADIUS_FRACTION * min_side;
    if total == 0 {
        return floor;
    }
    (base * libm::sqrt(count as f64 / total as f64)).max(floor)
}

/// Node radius for a cluster: small enough that phyllotaxis packing always
/// stays inside the circle.
pub fn node_radius(cluster_radius: f64, count: usize, canvas: Size) -> f64 {
    let floor = MIN_RADIUS_FRACTION * canvas.min_side();
    (0.25 * floor).min(cluster_radius / (2.0 * libm::sqrt(count as f64 + 1.0)))
}

/// Rotation of the spiral and the sunflower pattern, from the seed.
fn phase(seed: u64) -> f64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 * PI
}

/// Places clusters largest first (ties by topic id, unclassified last)
/// along a spiral from the canvas center, each at the first spiral point
/// where it fits inside the canvas and clears every placed cluster by the
/// gap. Nodes fill each circle in study-id order.
pub fn compute_layout(atlas: &EvidenceAtlas, config: &LayoutConfig) -> Result<MapLayout, LayoutError> {
    let canvas = config.canvas;
    if !(canvas.width > 0.0 && canvas.height > 0.0)
        || !canvas.width.is_finite()
        || !canvas.height.is_finite()
    {
        return Err(LayoutError::InvalidCanvas);
    }
    let total = atlas.len();
    let min_side = canvas.min_side();
    let gap = GAP_FRACTION * min_side;
    // Rounding slack so placed circles pass a re-computed distance check.
    let slack = 1e-9 * min_side;
    let turn_advance = GAP_FRACTION * min_side / (2.0 * PI);
    let max_spiral = 0.5 * libm::hypot(canvas.width, canvas.height);
    let (cx, cy) = (canvas.width / 2.0, canvas.height / 2.0);
    let rotation = phase(config.seed);

    let mut order: Vec<(&str, usize, usize)> = atlas
        .topics()
        .iter()
        .enumerate()
        .map(|(i, t)| (t.topic_id.as_str(), t.members.count(), i))
        .collect();
    order.sort_by(|a, b| {
        let a_last = a.0 == UNCLASSIFIED_ID;
        let b_last = b.0 == UNCLASSIFIED_ID;
        a_last
            .cmp(&b_last)
            .then(b.1.cmp(&a.1))
            .then(a.0.cmp(b.0))
    });

    let mut clusters: Vec<ClusterCircle> = Vec::with_capacity(order.len());
    let mut nodes = Vec::with_capacity(total);
    for (topic_id, count, topic_pos) in order {
        let radius = cluster_radius(count, total, canvas);
        let mut step = 0usize;
        let (x, y) = loop {
            let theta = step as f64 * SPIRAL_STEP;
            let spiral_r = turn_advance * theta;
            if spiral_r > max_spiral {
                return Err(LayoutError::CanvasTooSmall {
                    width: canvas.width,
                    height: canvas.height,
                });
            }
            let x = cx + spiral_r * libm::cos(theta + rotation);
            let y = cy + spiral_r * libm::sin(theta + rotation);
            let inside = x - radius >= 0.0
                && y - radius >= 0.0
                && x + radius <= canvas.width
                && y + radius <= canvas.height;
            let clear = clusters.iter().all(|c| {
                libm::hypot(x - c.x, y - c.y) >= c.radius + radius + gap + slack
            });
            if inside && clear {
                break (x, y);
            }
            step += 1;
        };

        let members = &atlas.topics()[topic_pos].members;
        let node_r = node_radius(radius, count, canvas);
        let reach = radius - node_r;
        for (i, ordinal) in members.iter().enumerate() {
            let rho = reach * libm::sqrt((i as f64 + 0.5) / count as f64);
            let angle = i as f64 * GOLDEN_ANGLE + rotation;
            nodes.push(NodePosition {
                study_id: atlas.study(ordinal).id.clone(),
                topic_id: topic_id.into(),
                x: x + rho * libm::cos(angle),
                y: y + rho * libm::sin(angle),
                radius: node_r,
            });
        }
        clusters.push(ClusterCircle {
            topic_id: topic_id.into(),
            x,
            y,
            radius,
            count,
        });
    }

    Ok(MapLayout {
        canvas,
        clusters,
        nodes,
        seed: config.seed,
    })
}

/// The viewport drawn on a minimap of the given size: scaled by minimap
/// size over canvas size per axis, then clamped to the minimap.
pub fn minimap_frame(layout: &MapLayout, viewport: Rect, minimap: Size) -> Rect {
    let sx = minimap.width / layout.canvas.width;
    let sy = minimap.height / layout.canvas.height;
    let x0 = (viewport.x * sx).clamp(0.0, minimap.width);
    let y0 = (viewport.y * sy).clamp(0.0, minimap.height);
    let x1 = ((viewport.x + viewport.width) * sx).clamp(0.0, minimap.width);
    let y1 = ((viewport.y + viewport.height) * sy).clamp(0.0, minimap.height);
    Rect {
        x: x0,
        y: y0,
        width: x1 - x0,
        height: y1 - y0,
    }
}
