use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convex polygon in the floor plane, vertices counterclockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct PlanarPolygon {
    vertices: Vec<[f64; 2]>,
}

impl PlanarPolygon {
    /// Accepts either winding; clockwise input is reversed. Rejects fewer than three vertices,
    /// zero area, and non-convex outlines.
    pub fn new(mut vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let area = signed_area(&vertices);
        if area.abs() < 1e-12 {
            return Err(Error::InvalidInput("polygon has zero area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        let n = vertices.len();
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if cross(sub(b, a), sub(c, b)) < -1e-12 {
                return Err(Error::InvalidInput("polygon is not convex".into()));
            }
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]).expect("rectangle with positive extent")
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Rotates by `theta` about the origin, then translates by `(x, y)`.
    pub fn transformed(&self, x: f64, y: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let vertices = self
            .vertices
            .iter()
            .map(|&[px, py]| [c * px - s * py + x, s * px + c * py + y])
            .collect();
        Self { vertices }
    }

    /// Closed containment test (boundary counts as inside).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            cross(sub(b, a), sub(p, a)) >= -1e-12
        })
    }

    fn project(&self, axis: [f64; 2]) -> (f64, f64) {
        self.vertices
            .iter()
            .map(|&v| dot(v, axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                (lo.min(t), hi.max(t))
            })
    }

    fn edge_normals(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| {
            let e = sub(self.vertices[(i + 1) % n], self.vertices[i]);
            [e[1], -e[0]]
        })
    }
}

impl TryFrom<Vec<[f64; 2]>> for PlanarPolygon {
    type Error = Error;

    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PlanarPolygon> for Vec<[f64; 2]> {
    fn from(p: PlanarPolygon) -> Self {
        p.vertices
    }
}

/// Separating-axis test over the edge normals of both polygons. Touching polygons intersect.
pub fn polygons_intersect(a: &PlanarPolygon, b: &PlanarPolygon) -> bool {
    for axis in a.edge_normals().chain(b.edge_normals()) {
        let (amin, amax) = a.project(axis);
        let (bmin, bmax) = b.project(axis);
        if amax < bmin || bmax < amin {
            return false;
        }
    }
    true
}

fn signed_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>()
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_square(x: f64, y: f64) -> PlanarPolygon {
        PlanarPolygon::rectangle(x, y, x + 1.0, y + 1.0)
    }

    #[test]
    fn disjoint_and_overlapping_squares() {
        assert!(!polygons_intersect(
            &unit_square(0.0, 0.0),
            &unit_square(3.0, 0.0)
        ));
        assert!(polygons_intersect(&unit_square(0.0, 0.0), &unit_square(0.5, 0.5)));
    }

    #[test]
    fn shared_edge_counts_as_collision() {
        let a = unit_square(0.0, 0.0);
        let b = unit_square(1.0, 0.0);
        // independent check: the midpoint of the shared edge lies in both
        let mid = [1.0, 0.5];
        assert!(a.contains(mid) && b.contains(mid));
        assert!(polygons_intersect(&a, &b));
    }

    #[test]
    fn rejects_bad_polygons() {
        assert!(PlanarPolygon::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(PlanarPolygon::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        let dart = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.5], [1.0, 2.0]];
        assert!(PlanarPolygon::new(dart).is_err());
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let p = PlanarPolygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(signed_area(p.vertices()) > 0.0);
        assert!(p.contains([0.5, 0.5]));
    }

    fn arb_box() -> impl Strategy<Value = PlanarPolygon> {
        (
            -3.0..3.0f64,
            -3.0..3.0f64,
            0.1..2.0f64,
            0.1..2.0f64,
            0.0..std::f64::consts::TAU,
        )
            .prop_map(|(x, y, w, h, th)| PlanarPolygon::rectangle(0.0, 0.0, w, h).transformed(x, y, th))
    }

    proptest! {
        #[test]
        fn intersection_is_symmetric(a in arb_box(), b in arb_box()) {
            prop_assert_eq!(polygons_intersect(&a, &b), polygons_intersect(&b, &a));
        }

        #[test]
        fn shared_vertex_implies_intersection(a in arb_box(), b in arb_box()) {
            if a.vertices().iter().any(|&v| b.contains(v)) || b.vertices().iter().any(|&v| a.contains(v)) {
                prop_assert!(polygons_intersect(&a, &b));
            }
        }
    }
}
