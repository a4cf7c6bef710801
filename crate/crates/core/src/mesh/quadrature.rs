use super::wachspress::{check_convex, eval_unchecked, NV};
use super::{polygon_area, polygon_centroid, Point};
use crate::error::{Error, Result};

/// Integration points and weights in physical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

// barycentric coordinates of the interior 3-point degree-2 rule
const TRI_RULE: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Centroid-fan rule: six triangles, three interior points each.
pub fn hex_quadrature(verts: &[Point; NV]) -> Result<QuadratureRule> {
    let area = polygon_area(verts);
    if !(area > 0.0) {
        return Err(Error::Geometry(format!(
            "element has non-positive area {area:e}"
        )));
    }
    check_convex(verts)?;
    let c = polygon_centroid(verts);
    let mut points = Vec::with_capacity(3 * NV);
    let mut weights = Vec::with_capacity(3 * NV);
    for i in 0..NV {
        let a = verts[i];
        let b = verts[(i + 1) % NV];
        let tri_area = 0.5 * ((a[0] - c[0]) * (b[1] - c[1]) - (b[0] - c[0]) * (a[1] - c[1]));
        for bary in TRI_RULE {
            points.push([
                bary[0] * c[0] + bary[1] * a[0] + bary[2] * b[0],
                bary[0] * c[1] + bary[1] * a[1] + bary[2] * b[1],
            ]);
            weights.push(tri_area / 3.0);
        }
    }
    Ok(QuadratureRule { points, weights })
}

/// Basis values and gradients at one integration point.
#[derive(Debug, Clone, Copy)]
pub struct BasisSample {
    pub weight: f64,
    pub shape: [f64; NV],
    pub grad: [[f64; 2]; NV],
}

/// Tabulates the Wachspress basis at every point of [`hex_quadrature`].
pub fn tabulate_basis(verts: &[Point; NV]) -> Result<Vec<BasisSample>> {
    let rule = hex_quadrature(verts)?;
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&p, &weight)| {
            let (shape, grad) = eval_unchecked(verts, p)?;
            debug_assert!(reproduces_linears(verts, p, &shape, &grad));
            Ok(BasisSample {
                weight,
                shape,
                grad,
            })
        })
        .collect()
}

/// Partition of unity and linear completeness of a basis sample.
pub(crate) fn reproduces_linears(
    verts: &[Point; NV],
    p: Point,
    shape: &[f64; NV],
    grad: &[[f64; 2]; NV],
) -> bool {
    let scale = verts
        .iter()
        .map(|v| v[0].abs().max(v[1].abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let sum: f64 = shape.iter().sum();
    let rx: f64 = shape.iter().zip(verts).map(|(n, v)| n * v[0]).sum();
    let ry: f64 = shape.iter().zip(verts).map(|(n, v)| n * v[1]).sum();
    let mut gsum = [0.0; 2];
    let mut outer = [[0.0; 2]; 2];
    for (g, v) in grad.iter().zip(verts) {
        for r in 0..2 {
            gsum[r] += g[r];
            for c in 0..2 {
                outer[r][c] += v[r] * g[c];
            }
        }
    }
    let gscale = grad
        .iter()
        .map(|g| g[0].abs().max(g[1].abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    (sum - 1.0).abs() < 1e-10
        && (rx - p[0]).abs() < 1e-10 * scale
        && (ry - p[1]).abs() < 1e-10 * scale
        && gsum[0].abs() < 1e-10 * gscale
        && gsum[1].abs() < 1e-10 * gscale
        && (outer[0][0] - 1.0).abs() < 1e-10
        && (outer[1][1] - 1.0).abs() < 1e-10
        && outer[0][1].abs() < 1e-10
        && outer[1][0].abs() < 1e-10
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::regular_hexagon;

    #[test]
    fn regular_unit_hexagon_area() {
        let hex = regular_hexagon(1.0, [0.3, -0.2]);
        let rule = hex_quadrature(&hex).unwrap();
        assert_eq!(rule.len(), 18);
        assert!(rule.weights.iter().all(|&w| w > 0.0));
        let area: f64 = rule.weights.iter().sum();
        assert!((area - 1.5 * 3f64.sqrt()).abs() < 1e-12);
        assert!((rule.integrate(|_| 1.0) - polygon_area(&hex)).abs() < 1e-12);
    }

    #[test]
    fn first_moment_recovers_centroid() {
        let center = [0.7, 1.9];
        let hex = regular_hexagon(0.4, center);
        let rule = hex_quadrature(&hex).unwrap();
        let area = rule.integrate(|_| 1.0);
        // polygon (shoelace) centroid oracle
        let mut cx = 0.0;
        let mut a2 = 0.0;
        for i in 0..6 {
            let p = hex[i];
            let q = hex[(i + 1) % 6];
            let cr = p[0] * q[1] - q[0] * p[1];
            a2 += cr;
            cx += (p[0] + q[0]) * cr;
        }
        let oracle = cx / (3.0 * a2);
        assert!((rule.integrate(|p| p[0]) / area - oracle).abs() < 1e-12);
        assert!((oracle - center[0]).abs() < 1e-12);
    }

    #[test]
    fn integrates_quadratics_exactly_on_irregular_hexagon() {
        let hex = [
            [0.0, 0.0],
            [2.0, 0.2],
            [3.0, 1.0],
            [2.5, 2.0],
            [1.0, 2.2],
            [-0.3, 1.1],
        ];
        let rule = hex_quadrature(&hex).unwrap();
        // oracle: Green's theorem for ∫ x² dΩ = ∮ x³/3 dy
        let mut exact = 0.0;
        for i in 0..6 {
            let p = hex[i];
            let q = hex[(i + 1) % 6];
            // ∫ x(t)^3/3 y'(t) dt over the edge, x linear in t
            let dy = q[1] - p[1];
            let x4 = (q[0].powi(4) - p[0].powi(4)) / (4.0 * (q[0] - p[0]));
            let integral = if (q[0] - p[0]).abs() > 1e-14 {
                x4
            } else {
                p[0].powi(3)
            };
            exact += integral / 3.0 * dy;
        }
        assert!((rule.integrate(|p| p[0] * p[0]) - exact).abs() < 1e-12 * exact.abs());
    }

    #[test]
    fn degenerate_element_is_rejected() {
        let flat = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0], [4.0, 0.0], [5.0, 0.0]];
        assert!(matches!(hex_quadrature(&flat), Err(Error::Geometry(_))));
    }

    #[test]
    fn tabulated_basis_is_complete() {
        let hex = regular_hexagon(0.01, [0.0, 0.0]);
        for s in tabulate_basis(&hex).unwrap() {
            assert!(s.shape.iter().all(|&n| n > 0.0));
        }
    }
}
