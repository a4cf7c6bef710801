//! Wachspress rational basis on convex hexagons.
//!
//! The basis is evaluated through the edge-distance form: for edge `i` running
//! from vertex `i` to vertex `i + 1` with outward unit normal `n_i`, the
//! distance of the evaluation point to the edge line is `h_i = (v_i - x) · n_i`
//! and the vertex weight is `w_i = (n_{i-1} × n_i) / (h_{i-1} h_i)`.

use super::Point;
use crate::error::{Error, Result};

/// Number of vertices of every element.
pub const NV: usize = 6;

/// Relative tolerance below which an evaluation point counts as on the boundary.
const BOUNDARY_TOL: f64 = 1e-12;

pub(crate) fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Fails unless the hexagon is strictly convex and counter-clockwise.
pub fn check_convex(verts: &[Point; NV]) -> Result<()> {
    let scale = diameter(verts);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Geometry("degenerate element (zero extent)".into()));
    }
    for i in 0..NV {
        let a = verts[(i + NV - 1) % NV];
        let b = verts[i];
        let c = verts[(i + 1) % NV];
        let turn = cross([b[0] - a[0], b[1] - a[1]], [c[0] - b[0], c[1] - b[1]]);
        if turn <= 1e-14 * scale * scale {
            return Err(Error::Geometry(format!(
                "element is not strictly convex and counter-clockwise at vertex {i}"
            )));
        }
    }
    Ok(())
}

fn diameter(verts: &[Point; NV]) -> f64 {
    let mut d: f64 = 0.0;
    for a in verts {
        for b in verts {
            d = d.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        }
    }
    d
}

/// Outward unit normals of the six edges.
fn edge_normals(verts: &[Point; NV]) -> [[f64; 2]; NV] {
    let mut normals = [[0.0; 2]; NV];
    for (i, n) in normals.iter_mut().enumerate() {
        let a = verts[i];
        let b = verts[(i + 1) % NV];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        *n = [dy / len, -dx / len];
    }
    normals
}

/// Shape values and gradients at `x`, without the convexity check.
pub(crate) fn eval_unchecked(
    verts: &[Point; NV],
    x: Point,
) -> Result<([f64; NV], [[f64; 2]; NV])> {
    let normals = edge_normals(verts);
    let scale = diameter(verts);
    let mut h = [0.0; NV];
    for i in 0..NV {
        h[i] = (verts[i][0] - x[0]) * normals[i][0] + (verts[i][1] - x[1]) * normals[i][1];
        if h[i] <= BOUNDARY_TOL * scale {
            return Err(Error::Domain(format!(
                "point ({}, {}) is not strictly inside the element",
                x[0], x[1]
            )));
        }
    }

    let mut w = [0.0; NV];
    // R_{i-1} + R_i, the logarithmic gradient of each weight.
    let mut dlog = [[0.0; 2]; NV];
    for i in 0..NV {
        let prev = (i + NV - 1) % NV;
        w[i] = cross(normals[prev], normals[i]) / (h[prev] * h[i]);
        dlog[i] = [
            normals[prev][0] / h[prev] + normals[i][0] / h[i],
            normals[prev][1] / h[prev] + normals[i][1] / h[i],
        ];
    }
    let total: f64 = w.iter().sum();
    let mut shape = [0.0; NV];
    let mut mean = [0.0; 2];
    for i in 0..NV {
        shape[i] = w[i] / total;
        mean[0] += shape[i] * dlog[i][0];
        mean[1] += shape[i] * dlog[i][1];
    }
    let mut grad = [[0.0; 2]; NV];
    for i in 0..NV {
        grad[i] = [
            shape[i] * (dlog[i][0] - mean[0]),
            shape[i] * (dlog[i][1] - mean[1]),
        ];
    }
    Ok((shape, grad))
}

/// Wachspress basis values `N_1..N_6` at an interior point.
pub fn wachspress_shape(verts: &[Point; NV], x: Point) -> Result<[f64; NV]> {
    check_convex(verts)?;
    eval_unchecked(verts, x).map(|(n, _)| n)
}

/// Gradients of the Wachspress basis at an interior point.
pub fn wachspress_gradients(verts: &[Point; NV], x: Point) -> Result<[[f64; 2]; NV]> {
    check_convex(verts)?;
    eval_unchecked(verts, x).map(|(_, g)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::regular_hexagon;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_interior(verts: &[Point; NV], rng: &mut ChaCha8Rng) -> Point {
        // convex combination with strictly positive weights
        let mut lam = [0.0; NV];
        for l in lam.iter_mut() {
            *l = rng.random_range(0.05..1.0);
        }
        let s: f64 = lam.iter().sum();
        let mut p = [0.0; 2];
        for (l, v) in lam.iter().zip(verts) {
            p[0] += l / s * v[0];
            p[1] += l / s * v[1];
        }
        p
    }

    fn random_convex_hexagon(rng: &mut ChaCha8Rng) -> [Point; NV] {
        // perturbed regular hexagon: angles jittered, radii jittered, then sheared
        let mut v = [[0.0; 2]; NV];
        for (k, vk) in v.iter_mut().enumerate() {
            let ang = (k as f64 + rng.random_range(-0.2..0.2)) * std::f64::consts::PI / 3.0;
            let r = rng.random_range(0.85..1.15);
            *vk = [r * ang.cos(), r * ang.sin()];
        }
        let shear = rng.random_range(-0.3..0.3);
        let sx = rng.random_range(0.5..2.0);
        for vk in v.iter_mut() {
            *vk = [sx * (vk[0] + shear * vk[1]) + 3.0, vk[1] - 1.0];
        }
        v
    }

    #[test]
    fn centroid_of_regular_hexagon_gives_one_sixth() {
        let hex = regular_hexagon(1.0, [0.0, 0.0]);
        let n = wachspress_shape(&hex, [0.0, 0.0]).unwrap();
        for v in n {
            assert!((v - 1.0 / 6.0).abs() < 1e-14);
        }
    }

    #[test]
    fn partition_of_unity_and_linear_reproduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let hex = regular_hexagon(1.0, [0.0, 0.0]);
        for _ in 0..100 {
            let x = random_interior(&hex, &mut rng);
            let n = wachspress_shape(&hex, x).unwrap();
            let sum: f64 = n.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            let rx: f64 = n.iter().zip(&hex).map(|(a, v)| a * v[0]).sum();
            let ry: f64 = n.iter().zip(&hex).map(|(a, v)| a * v[1]).sum();
            assert!((rx - x[0]).abs() < 1e-12 && (ry - x[1]).abs() < 1e-12);
            assert!(n.iter().all(|&a| a >= 0.0));
        }
        for _ in 0..50 {
            let hex = random_convex_hexagon(&mut rng);
            let x = random_interior(&hex, &mut rng);
            let n = wachspress_shape(&hex, x).unwrap();
            assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let hex = random_convex_hexagon(&mut rng);
            let x = random_interior(&hex, &mut rng);
            let g = wachspress_gradients(&hex, x).unwrap();
            let mut sum = [0.0; 2];
            let mut outer = [[0.0; 2]; 2];
            for (ga, va) in g.iter().zip(&hex) {
                for r in 0..2 {
                    sum[r] += ga[r];
                    for c in 0..2 {
                        outer[r][c] += va[r] * ga[c];
                    }
                }
            }
            assert!(sum[0].abs() < 1e-10 && sum[1].abs() < 1e-10);
            assert!((outer[0][0] - 1.0).abs() < 1e-10 && (outer[1][1] - 1.0).abs() < 1e-10);
            assert!(outer[0][1].abs() < 1e-10 && outer[1][0].abs() < 1e-10);
        }
    }

    #[test]
    fn centroid_gradients_are_sixty_degree_rotations() {
        let hex = regular_hexagon(1.0, [0.0, 0.0]);
        let g = wachspress_gradients(&hex, [0.0, 0.0]).unwrap();
        let (s, c) = (std::f64::consts::FRAC_PI_3.sin(), std::f64::consts::FRAC_PI_3.cos());
        for k in 0..NV {
            let a = g[k];
            let b = g[(k + 1) % NV];
            let rot = [c * a[0] - s * a[1], s * a[0] + c * a[1]];
            assert!((rot[0] - b[0]).abs() < 1e-13 && (rot[1] - b[1]).abs() < 1e-13);
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let step = 1e-6;
        for _ in 0..20 {
            let hex = random_convex_hexagon(&mut rng);
            let x = random_interior(&hex, &mut rng);
            let g = wachspress_gradients(&hex, x).unwrap();
            for dir in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[dir] += step;
                xm[dir] -= step;
                let np = wachspress_shape(&hex, xp).unwrap();
                let nm = wachspress_shape(&hex, xm).unwrap();
                for a in 0..NV {
                    let fd = (np[a] - nm[a]) / (2.0 * step);
                    let scale = g[a][dir].abs().max(1e-3);
                    assert!(
                        (fd - g[a][dir]).abs() / scale < 1e-5,
                        "fd {fd} vs analytic {}",
                        g[a][dir]
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_nonconvex_and_outside_points() {
        let mut hex = regular_hexagon(1.0, [0.0, 0.0]);
        assert!(matches!(
            wachspress_shape(&hex, [5.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            wachspress_shape(&hex, hex[0]),
            Err(Error::Domain(_))
        ));
        hex[1] = [0.0, 0.0];
        assert!(matches!(
            wachspress_shape(&hex, [0.1, 0.1]),
            Err(Error::Geometry(_))
        ));
        let mut cw = regular_hexagon(1.0, [0.0, 0.0]);
        cw.reverse();
        assert!(matches!(check_convex(&cw), Err(Error::Geometry(_))));
    }
}
