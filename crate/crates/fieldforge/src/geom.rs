//! Minimal 3-vector and line-segment helpers shared by the geometry builders
//! and the magnetostatic kernels.

/// Cartesian 3-vector, SI units throughout (meters for positions).
pub type Vec3 = [f64; 3];

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// A straight current-carrying segment from `start` to `end` (m).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Segment {
    pub start: Vec3,
    pub end: Vec3,
}

impl Segment {
    pub fn new(start: Vec3, end: Vec3) -> Self {
        Self { start, end }
    }

    pub fn delta(&self) -> Vec3 {
        sub(self.end, self.start)
    }

    pub fn length(&self) -> f64 {
        norm(self.delta())
    }

    pub fn midpoint(&self) -> Vec3 {
        scale(add(self.start, self.end), 0.5)
    }
}

/// Shortest distance from a point to a segment (clamped projection).
pub fn point_segment_distance(p: Vec3, s: &Segment) -> f64 {
    let d = s.delta();
    let len2 = dot(d, d);
    if len2 == 0.0 {
        return distance(p, s.start);
    }
    let t = (dot(sub(p, s.start), d) / len2).clamp(0.0, 1.0);
    distance(p, add(s.start, scale(d, t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cross_products_are_right_handed() {
        let x = [1.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        assert_eq!(cross(x, y), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn point_segment_distance_interior_and_endpoint() {
        let s = Segment::new([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        assert_relative_eq!(point_segment_distance([0.5, 2.0, 0.0], &s), 2.0);
        // Beyond the end, the distance is to the endpoint.
        assert_relative_eq!(
            point_segment_distance([2.0, 0.0, 0.0], &s),
            1.0,
            epsilon = 1e-15
        );
    }
}
