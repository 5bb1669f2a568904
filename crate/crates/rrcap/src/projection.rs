//! Orthographic rendering of a point cloud into six perpendicular views.
//!
//! All six views share one world-to-pixel scale derived from the bounding
//! box, so translating the cloud or scaling it uniformly leaves the rendered
//! images unchanged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::{Point, PointCloud};
use crate::Grid;

/// The six perpendicular projection directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl Axis {
    pub const ALL: [Axis; 6] = [
        Axis::PosX,
        Axis::NegX,
        Axis::PosY,
        Axis::NegY,
        Axis::PosZ,
        Axis::NegZ,
    ];

    /// Human-readable label, e.g. `+X`.
    pub fn label(self) -> &'static str {
        match self {
            Axis::PosX => "+X",
            Axis::NegX => "-X",
            Axis::PosY => "+Y",
            Axis::NegY => "-Y",
            Axis::PosZ => "+Z",
            Axis::NegZ => "-Z",
        }
    }

    /// Filename-safe tag, e.g. `px`.
    pub fn file_tag(self) -> &'static str {
        match self {
            Axis::PosX => "px",
            Axis::NegX => "nx",
            Axis::PosY => "py",
            Axis::NegY => "ny",
            Axis::PosZ => "pz",
            Axis::NegZ => "nz",
        }
    }

    /// Stable wire code used by the payload codec.
    pub fn code(self) -> u8 {
        Self::ALL.iter().position(|a| *a == self).unwrap() as u8
    }

    pub fn from_code(code: u8) -> Option<Axis> {
        Self::ALL.get(code as usize).copied()
    }

    /// In-plane coordinates and a depth key for one point. The viewer sits on
    /// the positive side of the axis for `Pos*` views, so a larger key is
    /// nearer the viewer in all cases.
    fn plane_coords(self, p: [f64; 3]) -> (f64, f64, f64) {
        let [x, y, z] = p;
        match self {
            Axis::PosX => (y, z, x),
            Axis::NegX => (y, z, -x),
            Axis::PosY => (x, z, y),
            Axis::NegY => (x, z, -y),
            Axis::PosZ => (x, y, z),
            Axis::NegZ => (x, y, -z),
        }
    }
}

/// Rendering parameters shared by the reference and receiver sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderParams {
    /// Square output resolution in pixels.
    pub resolution: u32,
    /// Splat radius in pixels; 1 fills a 3x3 disc, 0 a single pixel.
    pub splat_radius: u32,
    /// Gray level for unhit pixels.
    pub background: u8,
    /// Fraction of the resolution left empty on each border.
    pub padding_fraction: f64,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            resolution: 512,
            splat_radius: 1,
            background: 255,
            padding_fraction: 0.02,
        }
    }
}

impl RenderParams {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 64 {
            return Err(Error::InvalidParams(format!(
                "resolution {} is below the minimum of 64",
                self.resolution
            )));
        }
        if !(0.0..0.5).contains(&self.padding_fraction) {
            return Err(Error::InvalidParams(format!(
                "padding fraction {} outside [0, 0.5)",
                self.padding_fraction
            )));
        }
        Ok(())
    }
}

/// One rendered view: color image plus occupancy mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionView {
    pub axis: Axis,
    rows: usize,
    cols: usize,
    rgb: Vec<[u8; 3]>,
    mask: Vec<bool>,
}

impl ProjectionView {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rgb_at(&self, row: usize, col: usize) -> [u8; 3] {
        self.rgb[row * self.cols + col]
    }

    pub fn mask_at(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.cols + col]
    }

    /// Number of pixels hit by at least one point.
    pub fn occupied_pixels(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// The six views of one cloud under one set of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    pub views: Vec<ProjectionView>,
    pub params: RenderParams,
}

impl ProjectionSet {
    pub fn view(&self, axis: Axis) -> &ProjectionView {
        &self.views[axis.code() as usize]
    }
}

fn disc_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let limit = (radius as f64 + 0.5).powi(2);
    let mut offsets = Vec::new();
    for dr in -r..=r {
        for dc in -r..=r {
            if ((dr * dr + dc * dc) as f64) <= limit {
                offsets.push((dr, dc));
            }
        }
    }
    offsets
}

fn render_single_view(
    pc: &PointCloud,
    axis: Axis,
    center: [f64; 3],
    scale: f64,
    params: &RenderParams,
    offsets: &[(i64, i64)],
) -> ProjectionView {
    let res = params.resolution as usize;
    let half = (res as f64 - 1.0) / 2.0;
    let (cu, cv, _) = axis.plane_coords(center);

    let mut depth = vec![f64::NEG_INFINITY; res * res];
    let mut winner = vec![u32::MAX; res * res];

    for (i, p) in pc.points().iter().enumerate() {
        let (u, v, d) = axis.plane_coords(p.coords());
        let col = (half + (u - cu) * scale).round() as i64;
        let row = (half - (v - cv) * scale).round() as i64;
        for &(dr, dc) in offsets {
            let (r, c) = (row + dr, col + dc);
            if r < 0 || c < 0 || r >= res as i64 || c >= res as i64 {
                continue;
            }
            let idx = r as usize * res + c as usize;
            // Strict comparison keeps the earlier point on exact depth ties.
            if d > depth[idx] {
                depth[idx] = d;
                winner[idx] = i as u32;
            }
        }
    }

    let bg = [params.background; 3];
    let points = pc.points();
    let rgb: Vec<[u8; 3]> = winner
        .iter()
        .map(|&w| {
            if w == u32::MAX {
                bg
            } else {
                let Point { r, g, b, .. } = points[w as usize];
                [r, g, b]
            }
        })
        .collect();
    let mask: Vec<bool> = winner.iter().map(|&w| w != u32::MAX).collect();

    ProjectionView {
        axis,
        rows: res,
        cols: res,
        rgb,
        mask,
    }
}

/// Renders the six orthographic views of a cloud.
///
/// The bounding box is centered and scaled so its largest side fills the
/// usable area; the nearest point along each projection axis wins depth
/// conflicts, with the lower original index breaking exact ties.
pub fn render_views(pc: &PointCloud, params: &RenderParams) -> Result<ProjectionSet> {
    params.validate()?;
    let bbox = pc.bounding_box()?;
    if bbox.diagonal() == 0.0 {
        return Err(Error::DegenerateCloud);
    }
    let usable = params.resolution as f64 * (1.0 - 2.0 * params.padding_fraction);
    let scale = usable / bbox.max_extent();
    let center = bbox.center();
    let offsets = disc_offsets(params.splat_radius);

    let views: Vec<ProjectionView> = Axis::ALL
        .par_iter()
        .map(|axis| render_single_view(pc, *axis, center, scale, params, &offsets))
        .collect();

    Ok(ProjectionSet {
        views,
        params: *params,
    })
}

/// BT.601 luma of a view, scaled to `[0, 1]`.
pub fn to_grayscale(view: &ProjectionView) -> Grid {
    Grid::from_shape_fn((view.rows(), view.cols()), |(r, c)| {
        let [red, green, blue] = view.rgb_at(r, c);
        (0.299 * red as f64 + 0.587 * green as f64 + 0.114 * blue as f64) / 255.0
    })
}
