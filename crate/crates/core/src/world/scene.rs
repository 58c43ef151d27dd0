use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Pose2D};

/// Axis-aligned world rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Point2,
    pub max: Point2,
}

impl Bounds {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Circle { center: Point2, radius: f64 },
    #[serde(rename = "box")]
    Rect { min: Point2, max: Point2 },
}

impl Shape {
    /// Distance along a unit direction from `origin` to the first boundary
    /// crossing. Rays starting inside the shape report nothing.
    pub fn ray_hit(&self, origin: Point2, dir: (f64, f64)) -> Option<f64> {
        match *self {
            Shape::Circle { center, radius } => {
                let ox = origin.x - center.x;
                let oy = origin.y - center.y;
                let b = dir.0 * ox + dir.1 * oy;
                let c = ox * ox + oy * oy - radius * radius;
                if c <= 0.0 {
                    return None;
                }
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let t = -b - disc.sqrt();
                (t > 0.0).then_some(t)
            }
            Shape::Rect { min, max } => {
                if origin.x >= min.x && origin.x <= max.x && origin.y >= min.y && origin.y <= max.y
                {
                    return None;
                }
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                for (o, d, lo, hi) in [
                    (origin.x, dir.0, min.x, max.x),
                    (origin.y, dir.1, min.y, max.y),
                ] {
                    if d == 0.0 {
                        if o < lo || o > hi {
                            return None;
                        }
                    } else {
                        let t1 = (lo - o) / d;
                        let t2 = (hi - o) / d;
                        let (a, b) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
                        t_near = t_near.max(a);
                        t_far = t_far.min(b);
                    }
                }
                (t_near <= t_far && t_near > 0.0).then_some(t_near)
            }
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        match *self {
            Shape::Circle { center, radius } => p.distance(&center) <= radius,
            Shape::Rect { min, max } => p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y,
        }
    }

    /// Euclidean distance from `p` to the shape; zero inside.
    pub fn distance(&self, p: Point2) -> f64 {
        match *self {
            Shape::Circle { center, radius } => (p.distance(&center) - radius).max(0.0),
            Shape::Rect { min, max } => {
                let dx = (min.x - p.x).max(p.x - max.x).max(0.0);
                let dy = (min.y - p.y).max(p.y - max.y).max(0.0);
                dx.hypot(dy)
            }
        }
    }

    /// Axis-aligned bounding rectangle.
    pub fn aabb(&self) -> (Point2, Point2) {
        match *self {
            Shape::Circle { center, radius } => (
                Point2::new(center.x - radius, center.y - radius),
                Point2::new(center.x + radius, center.y + radius),
            ),
            Shape::Rect { min, max } => (min, max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    #[serde(flatten)]
    pub shape: Shape,
    pub height_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Obstacle {
    pub fn circle(center: Point2, radius: f64, height_m: f64) -> Self {
        Self {
            shape: Shape::Circle { center, radius },
            height_m,
            label: None,
        }
    }

    pub fn rect(min: Point2, max: Point2, height_m: f64) -> Self {
        Self {
            shape: Shape::Rect { min, max },
            height_m,
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// Static obstacle field the rover drives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldScene {
    pub name: String,
    pub bounds: Bounds,
    /// Initial rover pose; the origin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Pose2D>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    /// Seed for sensor noise and anything else random in a run.
    #[serde(default)]
    pub seed: u64,
}

/// Identifies an obstacle in diagnostics by label when it has one.
struct ObstacleName<'a>(usize, &'a Obstacle);

impl fmt::Display for ObstacleName<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.1.label {
            Some(l) => write!(f, "obstacles[{}] ({l})", self.0),
            None => write!(f, "obstacles[{}]", self.0),
        }
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scene parse error: {0}")]
    Parse(String),
    #[error("invalid scene: {0}")]
    Invalid(String),
}

impl WorldScene {
    pub fn new(name: impl Into<String>, bounds: Bounds) -> Self {
        Self {
            name: name.into(),
            bounds,
            start: None,
            obstacles: Vec::new(),
            seed: 0,
        }
    }

    pub fn with_start(mut self, start: Pose2D) -> Self {
        self.start = Some(start);
        self
    }

    pub fn with_obstacle(mut self, obstacle: Obstacle) -> Self {
        self.obstacles.push(obstacle);
        self
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let b = &self.bounds;
        if !(b.width() > 0.0 && b.height() > 0.0) || !b.width().is_finite() || !b.height().is_finite()
        {
            return Err(SceneError::Invalid(format!(
                "bounds must have positive area, got {:?}..{:?}",
                b.min, b.max
            )));
        }
        let mut problems = Vec::new();
        for (i, o) in self.obstacles.iter().enumerate() {
            let name = ObstacleName(i, o);
            if !(o.height_m >= 0.0) || !o.height_m.is_finite() {
                problems.push(format!("{name}: height_m must be >= 0, got {}", o.height_m));
            }
            match o.shape {
                Shape::Circle { radius, .. } if !(radius > 0.0) => {
                    problems.push(format!("{name}: radius must be positive, got {radius}"));
                    continue;
                }
                Shape::Rect { min, max } if !(max.x > min.x && max.y > min.y) => {
                    problems.push(format!("{name}: box max must exceed min"));
                    continue;
                }
                _ => {}
            }
            let (lo, hi) = o.shape.aabb();
            if !(b.contains(lo) && b.contains(hi)) {
                problems.push(format!("{name} lies outside the scene bounds"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SceneError::Invalid(problems.join("; ")))
        }
    }

    /// Obstacles tall enough to register on a sensor.
    pub fn visible_obstacles(&self) -> impl Iterator<Item = &Obstacle> {
        self.obstacles.iter().filter(|o| o.height_m > 0.0)
    }

    /// Nearest sensed intersection along a unit ray: (distance, obstacle).
    pub fn cast_ray(&self, origin: Point2, dir: (f64, f64)) -> Option<(f64, &Obstacle)> {
        let mut best: Option<(f64, &Obstacle)> = None;
        for o in self.visible_obstacles() {
            if let Some(t) = o.shape.ray_hit(origin, dir) {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, o));
                }
            }
        }
        best
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }
}

/// Parses and validates scene text.
pub fn parse_scene(text: &str) -> Result<WorldScene, SceneError> {
    let scene: WorldScene = toml::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
    scene.validate()?;
    Ok(scene)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<WorldScene, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scene(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EMPTY: &str = r#"
name = "empty"
bounds = { min = { x = 0.0, y = 0.0 }, max = { x = 10.0, y = 10.0 } }
"#;

    const TWO_BOXES: &str = r#"
name = "steps"
seed = 3
bounds = { min = { x = 0.0, y = 0.0 }, max = { x = 10.0, y = 10.0 } }

[[obstacles]]
shape = "box"
min = { x = 2.0, y = 2.0 }
max = { x = 3.0, y = 3.0 }
height_m = 0.1

[[obstacles]]
shape = "box"
min = { x = 5.0, y = 5.0 }
max = { x = 6.0, y = 7.0 }
height_m = 0.5
"#;

    #[test]
    fn empty_scene() {
        let s = parse_scene(EMPTY).unwrap();
        assert!(s.obstacles.is_empty());
        assert_eq!(s.bounds.width(), 10.0);
        assert_eq!(parse_scene(EMPTY).unwrap(), s);
    }

    #[test]
    fn heights_preserved() {
        let s = parse_scene(TWO_BOXES).unwrap();
        let h: Vec<f64> = s.obstacles.iter().map(|o| o.height_m).collect();
        assert_eq!(h, vec![0.1, 0.5]);
        assert_eq!(s.seed, 3);
        let again = parse_scene(&s.to_toml()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn out_of_bounds_obstacle_named() {
        let text = r#"
name = "bad"
bounds = { min = { x = 0.0, y = 0.0 }, max = { x = 4.0, y = 4.0 } }
[[obstacles]]
shape = "circle"
center = { x = 1.0, y = 1.0 }
radius = 0.2
height_m = 0.3
[[obstacles]]
shape = "circle"
label = "boulder"
center = { x = 3.9, y = 1.0 }
radius = 0.5
height_m = 0.3
"#;
        let err = parse_scene(text).unwrap_err().to_string();
        assert!(err.contains("obstacles[1] (boulder)"), "{err}");
        assert!(!err.contains("obstacles[0]"), "{err}");
    }

    #[test]
    fn parse_error_has_location() {
        let err = parse_scene("name = \"x\"\nbounds = 3\n").unwrap_err().to_string();
        assert!(err.contains("line 2") || err.contains("bounds"), "{err}");
    }

    #[test]
    fn negative_height_rejected() {
        let s = WorldScene::new(
            "n",
            Bounds::new(Point2::new(0.0, 0.0), Point2::new(5.0, 5.0)),
        )
        .with_obstacle(Obstacle::circle(Point2::new(2.0, 2.0), 0.5, -0.1));
        assert!(s.validate().is_err());
    }

    #[test]
    fn ray_hits() {
        let c = Shape::Circle {
            center: Point2::new(3.0, 0.0),
            radius: 1.0,
        };
        assert_eq!(c.ray_hit(Point2::new(0.0, 0.0), (1.0, 0.0)), Some(2.0));
        assert_eq!(c.ray_hit(Point2::new(0.0, 0.0), (-1.0, 0.0)), None);
        let r = Shape::Rect {
            min: Point2::new(2.0, -1.0),
            max: Point2::new(3.0, 1.0),
        };
        assert_eq!(r.ray_hit(Point2::new(0.0, 0.0), (1.0, 0.0)), Some(2.0));
        assert_eq!(r.ray_hit(Point2::new(0.0, 5.0), (1.0, 0.0)), None);
        assert_eq!(r.ray_hit(Point2::new(2.5, 0.0), (1.0, 0.0)), None);
    }
}
