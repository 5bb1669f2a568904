//! The reduced-reference payload and its binary codec.
//!
//! The reference side ships six downsampled saliency maps and six Sobel-std
//! scalars together with the rendering parameters. Carrying the reference
//! Sobel scalar is what makes the receiver side work without the original
//! cloud. Payload size depends only on (resolution, scale), never on point
//! count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;
use crate::projection::{render_views, to_grayscale, Axis, RenderParams};
use crate::quality::sobel_spatial_std;
use crate::saliency::{downsample, saliency_map, SaliencyMap};
use crate::Grid;

pub const PAYLOAD_MAGIC: [u8; 4] = *b"RRCP";
pub const PAYLOAD_VERSION: u16 = 1;

/// Per-view reduced-reference record.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewRecord {
    pub axis: Axis,
    pub saliency: SaliencyMap,
    /// Sobel-magnitude standard deviation of the full-resolution grayscale
    /// reference view.
    pub sobel_std: f64,
}

/// Everything the receiver needs to score a distorted cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePayload {
    pub version: u16,
    pub render_params: RenderParams,
    pub scale: u16,
    views: Vec<ViewRecord>,
}

impl ReferencePayload {
    /// Validates and assembles a payload; the six records may arrive in any
    /// order and are stored in canonical axis order.
    pub fn new(render_params: RenderParams, scale: u16, views: Vec<ViewRecord>) -> Result<Self> {
        render_params.validate()?;
        if scale == 0 {
            return Err(Error::InvalidParams("scale must be positive".into()));
        }
        if render_params.resolution % scale as u32 != 0 {
            return Err(Error::InvalidParams(format!(
                "resolution {} is not a multiple of scale {scale}",
                render_params.resolution
            )));
        }
        if views.len() != Axis::ALL.len() {
            return Err(Error::InvalidParams(format!(
                "expected 6 view records, got {}",
                views.len()
            )));
        }
        let side = (render_params.resolution / scale as u32) as usize;
        let mut slots: Vec<Option<ViewRecord>> = vec![None; 6];
        for record in views {
            if record.saliency.data.dim() != (side, side) {
                return Err(Error::InvalidParams(format!(
                    "saliency map for {} is {:?}, expected {side}x{side}",
                    record.axis.label(),
                    record.saliency.data.dim()
                )));
            }
            if !(record.sobel_std.is_finite() && record.sobel_std >= 0.0) {
                return Err(Error::InvalidParams("sobel_std must be finite and nonnegative".into()));
            }
            if record.saliency.data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidParams("saliency values must be finite and nonnegative".into()));
            }
            let slot = record.axis.code() as usize;
            if slots[slot].is_some() {
                return Err(Error::InvalidParams(format!(
                    "duplicate view record for {}",
                    record.axis.label()
                )));
            }
            slots[slot] = Some(record);
        }
        Ok(Self {
            version: PAYLOAD_VERSION,
            render_params,
            scale,
            views: slots.into_iter().map(|s| s.unwrap()).collect(),
        })
    }

    pub fn view(&self, axis: Axis) -> &ViewRecord {
        &self.views[axis.code() as usize]
    }

    pub fn views(&self) -> &[ViewRecord] {
        &self.views
    }
}

/// Renders the reference cloud and packages its reduced-reference payload.
pub fn extract_reference(
    pc: &PointCloud,
    render_params: &RenderParams,
    scale: u16,
) -> Result<ReferencePayload> {
    let set = render_views(pc, render_params)?;
    let records: Vec<ViewRecord> = Axis::ALL
        .par_iter()
        .map(|axis| -> Result<ViewRecord> {
            let gray = to_grayscale(set.view(*axis));
            let down = downsample(&gray, scale as usize)?;
            Ok(ViewRecord {
                axis: *axis,
                saliency: saliency_map(&down),
                sobel_std: sobel_spatial_std(&gray)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ReferencePayload::new(*render_params, scale, records)
}

/// Serializes a payload to the `.rrcap` wire format.
pub fn encode(payload: &ReferencePayload) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&PAYLOAD_MAGIC);
    out.extend_from_slice(&payload.version.to_le_bytes());
    out.extend_from_slice(&payload.render_params.resolution.to_le_bytes());
    out.extend_from_slice(&payload.render_params.splat_radius.to_le_bytes());
    out.push(payload.render_params.background);
    out.extend_from_slice(&payload.render_params.padding_fraction.to_le_bytes());
    out.extend_from_slice(&payload.scale.to_le_bytes());
    for record in &payload.views {
        out.push(record.axis.code());
        let (rows, cols) = record.saliency.data.dim();
        out.extend_from_slice(&(rows as u16).to_le_bytes());
        out.extend_from_slice(&(cols as u16).to_le_bytes());
        for v in record.saliency.data.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&record.sobel_std.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Truncated);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Minimum byte length of any structurally complete payload: header plus six
/// empty-map records plus the checksum.
const MIN_PAYLOAD_LEN: usize = 25 + 6 * 13 + 4;

/// Parses and verifies a `.rrcap` byte stream.
pub fn decode(data: &[u8]) -> Result<ReferencePayload> {
    if data.len() < 4 {
        return Err(Error::Truncated);
    }
    if data[..4] != PAYLOAD_MAGIC {
        return Err(Error::BadMagic);
    }
    if data.len() < 6 {
        return Err(Error::Truncated);
    }
    let version = u16::from_le_bytes([data[4], data[5]]);
    if version != PAYLOAD_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if data.len() < MIN_PAYLOAD_LEN {
        return Err(Error::Truncated);
    }

    let body_len = data.len() - 4;
    let stored_crc = u32::from_le_bytes(data[body_len..].try_into().unwrap());
    if crc32fast::hash(&data[..body_len]) != stored_crc {
        return Err(Error::ChecksumMismatch);
    }

    let mut r = Reader {
        data: &data[..body_len],
        pos: 6,
    };
    let render_params = RenderParams {
        resolution: r.u32()?,
        splat_radius: r.u32()?,
        background: r.u8()?,
        padding_fraction: r.f64()?,
    };
    let scale = r.u16()?;
    let mut views = Vec::with_capacity(6);
    for _ in 0..6 {
        let axis = Axis::from_code(r.u8()?)
            .ok_or_else(|| Error::InvalidParams("unknown axis code".into()))?;
        let rows = r.u16()? as usize;
        let cols = r.u16()? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(r.f64()?);
        }
        let saliency = SaliencyMap {
            data: Grid::from_shape_vec((rows, cols), data)
                .map_err(|e| Error::InvalidParams(e.to_string()))?,
            scale: scale as usize,
        };
        let sobel_std = r.f64()?;
        views.push(ViewRecord {
            axis,
            saliency,
            sobel_std,
        });
    }
    if r.pos != body_len {
        return Err(Error::InvalidParams("trailing bytes after payload body".into()));
    }
    ReferencePayload::new(render_params, scale, views)
}
