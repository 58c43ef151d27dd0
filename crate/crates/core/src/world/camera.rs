use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::{RoverState, SimError, WorldScene};
use crate::geometry::normalize_angle;

/// Pinhole navigation camera looking along the rover heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view, rad.
    pub hfov: f64,
    /// Lens height above ground, m.
    pub mount_height: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            width: 1280,
            height: 720,
            hfov: 90f64.to_radians(),
            mount_height: 0.5,
        }
    }
}

impl CameraConfig {
    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        0.5 * self.width as f64 / (0.5 * self.hfov).tan()
    }
}

const SKY_TOP: [f64; 3] = [18.0, 20.0, 34.0];
const SKY_HORIZON: [f64; 3] = [70.0, 72.0, 86.0];
const GROUND_A: [f64; 3] = [128.0, 116.0, 100.0];
const GROUND_B: [f64; 3] = [112.0, 101.0, 87.0];
const PALETTE: [[f64; 3]; 6] = [
    [170.0, 150.0, 120.0],
    [150.0, 135.0, 125.0],
    [185.0, 160.0, 110.0],
    [140.0, 140.0, 150.0],
    [160.0, 120.0, 100.0],
    [130.0, 150.0, 130.0],
];

fn to_rgb(c: [f64; 3]) -> Rgb<u8> {
    Rgb(c.map(|v| v.round().clamp(0.0, 255.0) as u8))
}

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i] + (b[i] - a[i]) * t)
}

/// Renders a flat-shaded first-person view: sky band, tiled ground plane and
/// obstacles drawn as columns whose extent follows pinhole projection.
pub fn render_camera(
    state: &RoverState,
    scene: &WorldScene,
    cfg: &CameraConfig,
) -> Result<RgbImage, SimError> {
    if cfg.width == 0 || cfg.height == 0 {
        return Err(SimError::InvalidCamera(format!(
            "dimensions must be positive, got {}x{}",
            cfg.width, cfg.height
        )));
    }
    if !(cfg.hfov > 0.0 && cfg.hfov < std::f64::consts::PI) || !(cfg.mount_height > 0.0) {
        return Err(SimError::InvalidCamera("hfov must be in (0, pi), mount height positive".into()));
    }
    let (w, h) = (cfg.width, cfg.height);
    let f = cfg.focal_px();
    let cx = 0.5 * w as f64;
    let cy = 0.5 * h as f64;
    let pose = state.pose;
    let (sin_h, cos_h) = pose.theta.sin_cos();
    let mut img = RgbImage::new(w, h);

    for u in 0..w {
        // camera-frame lateral offset, positive to the left
        let lateral = (cx - (u as f64 + 0.5)) / f;
        let azimuth = lateral.atan();
        let (s, c) = normalize_angle(pose.theta + azimuth).sin_cos();
        let hit = scene.cast_ray(pose.position(), (c, s));

        for v in 0..h {
            let row = v as f64 + 0.5;
            let px = if row < cy {
                lerp(SKY_TOP, SKY_HORIZON, row / cy)
            } else {
                // ground point seen through this pixel
                let depth = f * cfg.mount_height / (row - cy);
                let gx = pose.x + depth * cos_h - depth * lateral * sin_h;
                let gy = pose.y + depth * sin_h + depth * lateral * cos_h;
                let tile = ((gx * 2.0).floor() as i64 + (gy * 2.0).floor() as i64).rem_euclid(2);
                let base = if tile == 0 { GROUND_A } else { GROUND_B };
                let fade = (depth / 30.0).min(1.0);
                lerp(base, SKY_HORIZON, fade * 0.6)
            };
            img.put_pixel(u, v, to_rgb(px));
        }

        if let Some((dist, obstacle)) = hit {
            let depth = dist * azimuth.cos();
            let top = cy - f * (obstacle.height_m - cfg.mount_height) / depth;
            let bottom = cy + f * cfg.mount_height / depth;
            let v0 = top.max(0.0).round() as u32;
            let v1 = (bottom.min(h as f64)).round() as u32;
            let idx = scene
                .obstacles
                .iter()
                .position(|o| std::ptr::eq(o, obstacle))
                .unwrap_or(0);
            let base = PALETTE[idx % PALETTE.len()];
            let shade = 1.0 / (1.0 + 0.08 * dist);
            for v in v0..v1 {
                let t = (v as f64 - top) / (bottom - top).max(1.0);
                let c = base.map(|x| x * shade * (0.85 + 0.15 * t));
                img.put_pixel(u, v, to_rgb(c));
            }
        }
    }
    Ok(img)
}
