//! Incremental 3D convex hull.

use std::collections::HashSet;

use nalgebra::Vector3;

#[derive(Debug, Clone)]
struct Face {
    v: [usize; 3],
    normal: Vector3<f64>,
    offset: f64,
}

impl Face {
    fn new(points: &[Vector3<f64>], v: [usize; 3]) -> Self {
        let [a, b, c] = v.map(|i| points[i]);
        let normal = (b - a).cross(&(c - a)).normalize();
        Face {
            v,
            normal,
            offset: normal.dot(&a),
        }
    }

    fn distance(&self, p: &Vector3<f64>) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// Triangulated hull with outward-facing triangles.
#[derive(Debug, Clone)]
pub struct ConvexHull {
    points: Vec<Vector3<f64>>,
    faces: Vec<Face>,
    interior: Vector3<f64>,
}

impl ConvexHull {
    /// `None` when the points span less than three dimensions.
    pub fn new(points: &[Vector3<f64>]) -> Option<Self> {
        if points.len() < 4 {
            return None;
        }
        let (lo, hi) = points.iter().fold(
            (Vector3::repeat(f64::MAX), Vector3::repeat(f64::MIN)),
            |(lo, hi), p| (lo.inf(p), hi.sup(p)),
        );
        let scale = (hi - lo).norm();
        if !(scale > 0.0 && scale.is_finite()) {
            return None;
        }
        let eps = 1e-10 * scale;

        let farthest = |score: &dyn Fn(&Vector3<f64>) -> f64| {
            points
                .iter()
                .enumerate()
                .map(|(i, p)| (i, score(p)))
                .fold((0, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best })
        };
        let i0 = farthest(&|p| -p.x).0;
        let p0 = points[i0];
        let (i1, d1) = farthest(&|p| (p - p0).norm());
        if d1 <= eps {
            return None;
        }
        let axis = (points[i1] - p0) / d1;
        let (i2, d2) = farthest(&|p| {
            let q = p - p0;
            (q - axis * q.dot(&axis)).norm()
        });
        if d2 <= eps {
            return None;
        }
        let plane_n = axis.cross(&(points[i2] - p0)).normalize();
        let (i3, d3) = farthest(&|p| (p - p0).dot(&plane_n).abs());
        if d3 <= eps {
            return None;
        }

        let interior = (points[i0] + points[i1] + points[i2] + points[i3]) / 4.0;
        let mut faces = Vec::new();
        for v in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
            let mut face = Face::new(points, v);
            if face.distance(&interior) > 0.0 {
                face = Face::new(points, [v[0], v[2], v[1]]);
            }
            faces.push(face);
        }

        let seeds = [i0, i1, i2, i3];
        for (i, p) in points.iter().enumerate() {
            if seeds.contains(&i) {
                continue;
            }
            let visible: Vec<bool> = faces.iter().map(|f| f.distance(p) > eps).collect();
            if !visible.iter().any(|&v| v) {
                continue;
            }
            // ordered list keeps face order (and the volume sum) deterministic
            let edges: Vec<(usize, usize)> = faces
                .iter()
                .zip(&visible)
                .filter(|(_, &v)| v)
                .flat_map(|(f, _)| [(f.v[0], f.v[1]), (f.v[1], f.v[2]), (f.v[2], f.v[0])])
                .collect();
            let lookup: HashSet<(usize, usize)> = edges.iter().copied().collect();
            let horizon: Vec<(usize, usize)> = edges
                .iter()
                .filter(|(a, b)| !lookup.contains(&(*b, *a)))
                .copied()
                .collect();
            let mut keep = visible.iter();
            faces.retain(|_| !*keep.next().unwrap());
            for (a, b) in horizon {
                faces.push(Face::new(points, [a, b, i]));
            }
        }

        Some(ConvexHull {
            points: points.to_vec(),
            faces,
            interior,
        })
    }

    pub fn volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.v.map(|i| self.points[i] - self.interior);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn triangles(&self) -> impl Iterator<Item = [Vector3<f64>; 3]> + '_ {
        self.faces.iter().map(|f| f.v.map(|i| self.points[i]))
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }
}

/// Volume of the convex hull, zero for degenerate point sets.
pub fn convex_hull_volume(points: &[Vector3<f64>]) -> f64 {
    ConvexHull::new(points).map_or(0.0, |h| h.volume())
}
