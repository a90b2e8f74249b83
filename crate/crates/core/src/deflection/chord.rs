use nalgebra::Point2;

/// Result of intersecting a line with a circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChordHits {
    None,
    Tangent(Point2<f64>),
    Secant(Point2<f64>, Point2<f64>),
}

impl ChordHits {
    pub fn count(&self) -> usize {
        match self {
            ChordHits::None => 0,
            ChordHits::Tangent(_) => 1,
            ChordHits::Secant(..) => 2,
        }
    }
}

/// Intersects the infinite line through `a` and `b` with a circle.
/// Tangency within 1e-12 relative to the radius is reported as a single point.
pub fn chord_circle_intersections(
    centre: Point2<f64>,
    radius: f64,
    a: Point2<f64>,
    b: Point2<f64>,
) -> ChordHits {
    let d = b - a;
    let len = d.norm();
    if len == 0.0 || !len.is_finite() {
        return ChordHits::None;
    }
    let d = d / len;
    let foot = a + d * (centre - a).dot(&d);
    let dist = (centre - foot).norm();
    let tol = 1e-12 * radius;
    if dist > radius + tol {
        ChordHits::None
    } else if dist >= radius - tol {
        ChordHits::Tangent(foot)
    } else {
        let half = (radius * radius - dist * dist).sqrt();
        ChordHits::Secant(foot - d * half, foot + d * half)
    }
}
