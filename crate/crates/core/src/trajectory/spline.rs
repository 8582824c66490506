//! Uniform cubic B-spline with an arc-length lookup table.

use crate::geometry::Vec2;

/// Quadrature sub-intervals per span for the arc-length table.
const SAMPLES_PER_SPAN: usize = 64;

#[derive(Clone, Debug)]
pub struct CubicBSpline {
    points: Vec<Vec2>,
    /// Cumulative arc length at every table knot, `spans * SAMPLES_PER_SPAN + 1` entries.
    table: Vec<f64>,
}

impl CubicBSpline {
    /// Needs at least four control points.
    pub fn new(points: Vec<Vec2>) -> Option<Self> {
        if points.len() < 4 {
            return None;
        }
        let mut s = Self {
            points,
            table: Vec::new(),
        };
        s.build_table();
        Some(s)
    }

    pub fn spans(&self) -> usize {
        self.points.len() - 3
    }

    pub fn length(&self) -> f64 {
        *self.table.last().expect("non-empty table")
    }

    fn span_points(&self, span: usize) -> [Vec2; 4] {
        [
            self.points[span],
            self.points[span + 1],
            self.points[span + 2],
            self.points[span + 3],
        ]
    }

    /// Position at global parameter `u ∈ [0, spans]`.
    pub fn point(&self, u: f64) -> Vec2 {
        let (span, t) = self.locate(u);
        let [p0, p1, p2, p3] = self.span_points(span);
        let it = 1.0 - t;
        let b0 = it * it * it;
        let b1 = 3.0 * t * t * t - 6.0 * t * t + 4.0;
        let b2 = -3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0;
        let b3 = t * t * t;
        (p0 * b0 + p1 * b1 + p2 * b2 + p3 * b3) * (1.0 / 6.0)
    }

    /// First derivative with respect to the global parameter.
    pub fn tangent(&self, u: f64) -> Vec2 {
        let (span, t) = self.locate(u);
        let [p0, p1, p2, p3] = self.span_points(span);
        let it = 1.0 - t;
        let d0 = -3.0 * it * it;
        let d1 = 9.0 * t * t - 12.0 * t;
        let d2 = -9.0 * t * t + 6.0 * t + 3.0;
        let d3 = 3.0 * t * t;
        (p0 * d0 + p1 * d1 + p2 * d2 + p3 * d3) * (1.0 / 6.0)
    }

    fn locate(&self, u: f64) -> (usize, f64) {
        let u = u.clamp(0.0, self.spans() as f64);
        let span = (u.floor() as usize).min(self.spans() - 1);
        (span, u - span as f64)
    }

    fn speed(&self, u: f64) -> f64 {
        self.tangent(u).norm()
    }

    /// Simpson's rule over `[a, b]`.
    fn simpson(&self, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (self.speed(a) + 4.0 * self.speed(0.5 * (a + b)) + self.speed(b))
    }

    fn build_table(&mut self) {
        let n = self.spans() * SAMPLES_PER_SPAN;
        let h = 1.0 / SAMPLES_PER_SPAN as f64;
        let mut table = Vec::with_capacity(n + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let a = i as f64 * h;
            acc += self.simpson(a, a + h);
            table.push(acc);
        }
        self.table = table;
    }

    /// Parameter at which the arc length from the start equals `s`
    /// (clamped to the curve), accurate to well under a millimetre.
    pub fn param_at_length(&self, s: f64) -> f64 {
        let h = 1.0 / SAMPLES_PER_SPAN as f64;
        if s <= 0.0 {
            return 0.0;
        }
        if s >= self.length() {
            return self.spans() as f64;
        }
        let i = self.table.partition_point(|&v| v <= s).saturating_sub(1);
        let (l0, l1) = (self.table[i], self.table[i + 1]);
        let a = i as f64 * h;
        let mut u = if l1 > l0 {
            a + h * (s - l0) / (l1 - l0)
        } else {
            a
        };
        // Newton refinement on the local arc-length integral.
        for _ in 0..3 {
            let err = l0 + self.simpson(a, u) - s;
            let v = self.speed(u);
            if v < 1e-12 || err.abs() < 1e-9 {
                break;
            }
            u = (u - err / v).clamp(a, a + h);
        }
        u
    }
}
