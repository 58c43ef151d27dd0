use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{RoverState, SimError, WorldScene};
use crate::geometry::{normalize_angle, Point2, Pose2D};

/// Planar depth fan standing in for the stereo camera's depth product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthSensorConfig {
    /// Horizontal field of view, rad.
    pub fov: f64,
    pub ray_count: usize,
    /// m
    pub max_range: f64,
    /// Standard deviation of additive Gaussian range noise, m.
    pub range_noise_sigma: f64,
    /// Hz
    pub rate_hz: f64,
}

impl Default for DepthSensorConfig {
    fn default() -> Self {
        Self {
            fov: 90f64.to_radians(),
            ray_count: 180,
            max_range: 10.0,
            range_noise_sigma: 0.0,
            rate_hz: 4.0,
        }
    }
}

impl DepthSensorConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.ray_count < 2 {
            return Err(SimError::InvalidSensor(format!(
                "ray_count must be >= 2, got {}",
                self.ray_count
            )));
        }
        if !(self.fov > 0.0 && self.fov <= std::f64::consts::PI) {
            return Err(SimError::InvalidSensor(format!(
                "fov must be in (0, pi], got {}",
                self.fov
            )));
        }
        if !(self.max_range > 0.0) || !(self.range_noise_sigma >= 0.0) {
            return Err(SimError::InvalidSensor(
                "max_range must be positive and noise sigma non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Ray azimuths relative to the heading, evenly spread over the fov.
    pub fn azimuths(&self) -> impl Iterator<Item = f64> + '_ {
        let step = self.fov / (self.ray_count - 1) as f64;
        (0..self.ray_count).map(move |i| -0.5 * self.fov + step * i as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    /// m, in `(0, max_range]`.
    pub range: f64,
    /// Height of the obstacle that stopped the ray, m.
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRay {
    /// Relative to the sensor heading, rad.
    pub azimuth: f64,
    /// `None` is a max-range miss.
    pub hit: Option<RayHit>,
}

impl DepthRay {
    /// World-frame direction of the ray from a scan origin.
    pub fn direction(&self, origin: &Pose2D) -> (f64, f64) {
        let (s, c) = normalize_angle(origin.theta + self.azimuth).sin_cos();
        (c, s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthScan {
    pub origin: Pose2D,
    pub rays: Vec<DepthRay>,
    pub max_range: f64,
    pub fov: f64,
    pub timestamp: f64,
}

impl DepthScan {
    /// World-frame end point of a ray: the hit, or the max-range point on a miss.
    pub fn endpoint(&self, ray: &DepthRay) -> Point2 {
        let d = ray.direction(&self.origin);
        let r = ray.hit.map_or(self.max_range, |h| h.range);
        Point2::new(self.origin.x + r * d.0, self.origin.y + r * d.1)
    }
}

/// Casts the sensor fan from the rover pose into the scene.
///
/// `noise` supplies Gaussian range perturbations; pass `None` for exact ranges.
pub fn sense_depth(
    state: &RoverState,
    scene: &WorldScene,
    cfg: &DepthSensorConfig,
    noise: Option<&mut ChaCha8Rng>,
) -> Result<DepthScan, SimError> {
    cfg.validate()?;
    let origin = state.pose;
    let gauss = Normal::new(0.0, cfg.range_noise_sigma).ok();
    let mut noise = noise.filter(|_| cfg.range_noise_sigma > 0.0);
    let rays = cfg
        .azimuths()
        .map(|azimuth| {
            let (s, c) = normalize_angle(origin.theta + azimuth).sin_cos();
            let hit = scene
                .cast_ray(origin.position(), (c, s))
                .filter(|(t, _)| *t <= cfg.max_range)
                .map(|(t, o)| {
                    let mut range = t;
                    if let (Some(rng), Some(g)) = (noise.as_deref_mut(), gauss.as_ref()) {
                        range = (t + g.sample(rng)).clamp(1e-3, cfg.max_range);
                    }
                    RayHit {
                        range,
                        height: o.height_m,
                    }
                });
            DepthRay { azimuth, hit }
        })
        .collect();
    Ok(DepthScan {
        origin,
        rays,
        max_range: cfg.max_range,
        fov: cfg.fov,
        timestamp: state.time,
    })
}

/// A depth sensor with its own seeded noise stream.
#[derive(Debug, Clone)]
pub struct DepthSensor {
    pub config: DepthSensorConfig,
    rng: ChaCha8Rng,
}

impl DepthSensor {
    pub fn new(config: DepthSensorConfig, seed: u64) -> Self {
        Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn scan(&mut self, state: &RoverState, scene: &WorldScene) -> Result<DepthScan, SimError> {
        sense_depth(state, scene, &self.config, Some(&mut self.rng))
    }
}
