use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{FactoredScene, Vec3};
use crate::grid::Grid;
use crate::synth::Rgb;

/// Color used for points of views without an image.
pub const DEFAULT_POINT_COLOR: Rgb = [200, 200, 200];

/// Metric world points of every exportable pixel with its color.
///
/// A pixel is exported when its depth is valid and, if a mask probability is
/// present, that probability is at least 0.5.
pub fn scene_points(
    scene: &FactoredScene,
    images: Option<&[Grid<Rgb>]>,
) -> Result<Vec<(Vec3, Rgb)>> {
    let maps = scene.metric_pointmaps()?;
    let mut out = Vec::new();
    for (i, (view, map)) in scene.views.iter().zip(&maps).enumerate() {
        let image = images.map(|im| &im[i]);
        if let Some(im) = image {
            im.check_dims(map.points(), "ply image vs points")?;
        }
        for k in 0..map.points().len() {
            let keep = map.validity().as_slice()[k]
                && view
                    .mask_prob
                    .as_ref()
                    .is_none_or(|m| m.as_slice()[k] >= 0.5);
            if keep {
                let c = image.map_or(DEFAULT_POINT_COLOR, |im| im.as_slice()[k]);
                out.push((map.points().as_slice()[k], c));
            }
        }
    }
    Ok(out)
}

/// Binary little-endian PLY with float32 xyz and u8 rgb per vertex.
pub fn ply_bytes(points: &[(Vec3, Rgb)]) -> Vec<u8> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        points.len()
    );
    let mut out = Vec::with_capacity(header.len() + points.len() * 15);
    out.extend_from_slice(header.as_bytes());
    for (p, c) in points {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend_from_slice(c);
    }
    out
}

pub fn write_ply(path: &Path, points: &[(Vec3, Rgb)]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&ply_bytes(points))
        .map_err(|e| Error::io(path, e))
}
