use serde::{Deserialize, Serialize};

use super::pose::Vec2;
use super::GeometryError;

/// Axis-aligned rectangle in world meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    pub fn new(min: Vec2, max: Vec2) -> Result<Self, GeometryError> {
        let b = Self { min, max };
        b.validate()?;
        Ok(b)
    }

    /// Square `[-half, half]²`.
    pub fn centered(half: f64) -> Self {
        Self {
            min: Vec2::new(-half, -half),
            max: Vec2::new(half, half),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(GeometryError::NonFinite { field: "bounds" });
        }
        if !(self.max.x > self.min.x && self.max.y > self.min.y) {
            return Err(GeometryError::InvalidConfig {
                field: "bounds",
                reason: "max must exceed min on both axes".into(),
            });
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        Vec2::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }

    /// Shrinks every side by `margin`; `None` if nothing is left.
    pub fn inset(&self, margin: f64) -> Option<Bounds> {
        let b = Bounds {
            min: Vec2::new(self.min.x + margin, self.min.y + margin),
            max: Vec2::new(self.max.x - margin, self.max.y - margin),
        };
        (b.max.x > b.min.x && b.max.y > b.min.y).then_some(b)
    }
}
