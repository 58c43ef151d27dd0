//! Payload layouts carried inside telemetry frames. All little-endian.
//!
//! | topic        | layout |
//! |--------------|--------|
//! | RoverPose    | x, y, θ, v, ω, time: 6 × f64 |
//! | Trajectory   | count u32, then (x, y) f32 pairs |
//! | GlobalPlan   | count u32, then (x, y, θ) f64 triples |
//! | LocalPlan    | count u32, (x, y, θ) f64 per pose, then count−1 segment speeds f64 |
//! | CostMap2D    | width u32, height u32, resolution f64, origin x f64, origin y f64, stamp f64, then width·height cost bytes, row-major from the origin row |
//! | StereoCloud, MapCloud | count u32, then (x, y, z f32, rgb u32) per point |
//! | ImageLeft    | baseline JPEG |
//! | GoalAck, Status, Command | UTF-8 JSON |

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Pose2D};
use crate::local_planner::{segment_rates, TebTrajectory};
use crate::mapping::{CellState, Costmap, GridGeometry, OccupancyGrid};
use crate::world::{DepthScan, RoverState};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PayloadError {
    #[error("payload too short: need {needed} bytes, have {available}")]
    Short { needed: usize, available: usize },
    #[error("invalid payload: {0}")]
    Invalid(String),
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, at: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], PayloadError> {
        if self.buf.len() - self.at < n {
            return Err(PayloadError::Short {
                needed: self.at + n,
                available: self.buf.len(),
            });
        }
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, PayloadError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, PayloadError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, PayloadError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn count(&mut self, item_size: usize) -> Result<usize, PayloadError> {
        let n = self.u32()? as usize;
        let left = self.buf.len() - self.at;
        if n.saturating_mul(item_size) > left {
            return Err(PayloadError::Short {
                needed: self.at + n * item_size,
                available: self.buf.len(),
            });
        }
        Ok(n)
    }
}

fn put_f64s(out: &mut Vec<u8>, vals: &[f64]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_rover_pose(state: &RoverState) -> Vec<u8> {
    let mut out = Vec::with_capacity(48);
    let p = state.pose;
    put_f64s(&mut out, &[p.x, p.y, p.theta, state.twist.v, state.twist.omega, state.time]);
    out
}

pub fn decode_rover_pose(buf: &[u8]) -> Result<RoverState, PayloadError> {
    let mut r = Reader::new(buf);
    let pose = Pose2D::new(r.f64()?, r.f64()?, r.f64()?);
    let twist = crate::locomotion::Twist::new(r.f64()?, r.f64()?);
    Ok(RoverState {
        pose,
        twist,
        time: r.f64()?,
    })
}

pub fn encode_trajectory(points: &[Point2]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 8 * points.len());
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    for p in points {
        out.extend_from_slice(&(p.x as f32).to_le_bytes());
        out.extend_from_slice(&(p.y as f32).to_le_bytes());
    }
    out
}

pub fn decode_trajectory(buf: &[u8]) -> Result<Vec<Point2>, PayloadError> {
    let mut r = Reader::new(buf);
    let n = r.count(8)?;
    (0..n)
        .map(|_| Ok(Point2::new(r.f32()? as f64, r.f32()? as f64)))
        .collect()
}

pub fn encode_poses(poses: &[Pose2D]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 24 * poses.len());
    out.extend_from_slice(&(poses.len() as u32).to_le_bytes());
    for p in poses {
        put_f64s(&mut out, &[p.x, p.y, p.theta]);
    }
    out
}

pub fn decode_poses(buf: &[u8]) -> Result<Vec<Pose2D>, PayloadError> {
    let mut r = Reader::new(buf);
    let n = r.count(24)?;
    (0..n)
        .map(|_| Ok(Pose2D::new(r.f64()?, r.f64()?, r.f64()?)))
        .collect()
}

/// Band poses followed by the signed speed of every segment.
pub fn encode_local_plan(traj: &TebTrajectory) -> Vec<u8> {
    let mut out = encode_poses(&traj.poses);
    let speeds: Vec<f64> = segment_rates(traj).iter().map(|t| t.v).collect();
    put_f64s(&mut out, &speeds);
    out
}

pub fn decode_local_plan(buf: &[u8]) -> Result<(Vec<Pose2D>, Vec<f64>), PayloadError> {
    let poses = decode_poses(buf)?;
    let mut r = Reader::new(buf);
    r.take(4 + 24 * poses.len())?;
    let speeds = (0..poses.len().saturating_sub(1))
        .map(|_| r.f64())
        .collect::<Result<_, _>>()?;
    Ok((poses, speeds))
}

pub const COSTMAP_HEADER: usize = 4 + 4 + 8 * 4;

pub fn encode_costmap(costmap: &Costmap) -> Vec<u8> {
    let g = costmap.geometry;
    let mut out = Vec::with_capacity(COSTMAP_HEADER + g.len());
    out.extend_from_slice(&(g.width as u32).to_le_bytes());
    out.extend_from_slice(&(g.height as u32).to_le_bytes());
    put_f64s(&mut out, &[g.resolution, g.origin.x, g.origin.y, costmap.stamp]);
    out.extend_from_slice(costmap.costs());
    out
}

pub fn decode_costmap(buf: &[u8]) -> Result<Costmap, PayloadError> {
    let mut r = Reader::new(buf);
    let w = r.u32()? as usize;
    let h = r.u32()? as usize;
    let res = r.f64()?;
    let origin = Point2::new(r.f64()?, r.f64()?);
    let stamp = r.f64()?;
    let g = GridGeometry::new(res, origin, w, h).map_err(|e| PayloadError::Invalid(e.to_string()))?;
    let costs = r.take(w * h)?.to_vec();
    Ok(Costmap::from_costs(g, costs, stamp))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    /// 0x00RRGGBB
    pub rgb: u32,
}

pub const CLOUD_POINT_SIZE: usize = 16;

pub fn encode_cloud(points: &[CloudPoint]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + CLOUD_POINT_SIZE * points.len());
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    for p in points {
        for v in [p.x, p.y, p.z] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&p.rgb.to_le_bytes());
    }
    out
}

pub fn decode_cloud(buf: &[u8]) -> Result<Vec<CloudPoint>, PayloadError> {
    let mut r = Reader::new(buf);
    let n = r.count(CLOUD_POINT_SIZE)?;
    (0..n)
        .map(|_| {
            Ok(CloudPoint {
                x: r.f32()?,
                y: r.f32()?,
                z: r.f32()?,
                rgb: r.u32()?,
            })
        })
        .collect()
}

const GROUND_RGB: u32 = 0x8a_84_7a;
const OBSTACLE_RGB: u32 = 0x00b0_5a32;

/// Re-projects a depth scan: ground points every `step` meters along each
/// ray and a vertical column of points at every hit.
pub fn stereo_cloud(scan: &DepthScan, step: f64) -> Vec<CloudPoint> {
    let mut pts = vec![];
    let o = scan.origin;
    for ray in &scan.rays {
        let (dx, dy) = ray.direction(&o);
        let reach = ray.hit.map_or(scan.max_range, |h| h.range);
        let mut s = step;
        while s < reach {
            pts.push(CloudPoint {
                x: (o.x + s * dx) as f32,
                y: (o.y + s * dy) as f32,
                z: 0.0,
                rgb: GROUND_RGB,
            });
            s += step;
        }
        if let Some(hit) = ray.hit {
            let end = scan.endpoint(ray);
            let mut z = 0.0;
            while z <= hit.height {
                pts.push(CloudPoint {
                    x: end.x as f32,
                    y: end.y as f32,
                    z: z as f32,
                    rgb: OBSTACLE_RGB,
                });
                z += step;
            }
        }
    }
    pts
}

/// Occupied cells of the accumulated map as points at cell centers.
pub fn map_cloud(grid: &OccupancyGrid) -> Vec<CloudPoint> {
    let g = grid.geometry;
    grid.cells()
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == CellState::Occupied)
        .map(|(i, _)| {
            let c = g.cell_center(g.cell_of_index(i));
            CloudPoint {
                x: c.x as f32,
                y: c.y as f32,
                z: 0.1,
                rgb: OBSTACLE_RGB,
            }
        })
        .collect()
}

pub fn encode_jpeg(img: &RgbImage, quality: u8) -> Result<Vec<u8>, PayloadError> {
    let mut buf = Cursor::new(Vec::new());
    JpegEncoder::new_with_quality(&mut buf, quality)
        .encode_image(img)
        .map_err(|e| PayloadError::Invalid(e.to_string()))?;
    Ok(buf.into_inner())
}

pub fn encode_json<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("payload serializes")
}

pub fn decode_json<T: for<'de> Deserialize<'de>>(buf: &[u8]) -> Result<T, PayloadError> {
    serde_json::from_slice(buf).map_err(|e| PayloadError::Invalid(e.to_string()))
}
