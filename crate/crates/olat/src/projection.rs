//! Quick-look rendering: three axis-aligned orthographic scatters of a
//! point cloud, written as one PNG strip.
//!
//! The panels project onto the (x, y), (x, z), and (y, z) planes and
//! share one scale derived from the cloud's bounding box, so the
//! proportions of the three views are directly comparable. The vertical
//! screen axis is flipped so "up" in shape coordinates renders upward.

use std::path::Path;

use image::{Rgb, RgbImage};
use olat_core::geometry::PointCloud;

use crate::error::{OlatError, Result};

/// Panel background.
const BG: Rgb<u8> = Rgb([255, 255, 255]);
/// Separator between panels.
const SEPARATOR: Rgb<u8> = Rgb([176, 176, 176]);
/// Point color.
const INK: Rgb<u8> = Rgb([24, 24, 32]);
/// Margin between a panel edge and the drawable area, in pixels.
const MARGIN: u32 = 8;

/// The (horizontal, vertical) shape axes of the three panels.
const PANEL_AXES: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Renders the three projections into a `3 * panel` by `panel` image.
pub fn render_projections(cloud: &PointCloud, panel: u32) -> RgbImage {
    let panel = panel.max(2 * MARGIN + 8);
    let mut img = RgbImage::from_pixel(3 * panel, panel, BG);
    for x in [panel, 2 * panel] {
        for y in 0..panel {
            img.put_pixel(x - 1, y, SEPARATOR);
            img.put_pixel(x, y, SEPARATOR);
        }
    }

    let pts = cloud.points();
    let mut center = [0.0f64; 3];
    let mut half = 0.0f64;
    for axis in 0..3 {
        let lo = pts.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        center[axis] = 0.5 * (lo + hi);
        half = half.max(0.5 * (hi - lo));
    }
    if half <= 0.0 {
        half = 1.0;
    }
    let extent = (panel / 2 - MARGIN) as f64;

    for (pi, (ax, ay)) in PANEL_AXES.iter().enumerate() {
        let x0 = pi as u32 * panel;
        for p in pts {
            let u = (p[*ax] - center[*ax]) / half * extent + (panel / 2) as f64;
            let v = (panel / 2) as f64 - (p[*ay] - center[*ay]) / half * extent;
            let (cx, cy) = (u.round() as i64, v.round() as i64);
            // A 2x2 dot keeps sparse clouds visible at small panel sizes.
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let (px, py) = (cx + dx, cy + dy);
                if px >= 0 && (px as u32) < panel && py >= 0 && (py as u32) < panel {
                    img.put_pixel(x0 + px as u32, py as u32, INK);
                }
            }
        }
    }
    img
}

/// Renders and writes the projection strip as a PNG file.
pub fn save_projection(cloud: &PointCloud, path: &Path, panel: u32) -> Result<()> {
    let img = render_projections(cloud, panel);
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| OlatError::io(path, std::io::Error::other(e.to_string())))?;
    crate::formats::write_bytes(path, &bytes)
}
