//! Design variables, density filter, extended SIMP interpolation and volume
//! measures.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// Largest number of design variables per element (four phases).
pub const MAX_VARS: usize = 3;

/// Candidate materials for the extended SIMP scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialSet {
    youngs: Vec<f64>,
    e_min: f64,
    penal: f64,
    nu: f64,
    thickness: f64,
}

impl MaterialSet {
    /// `youngs` must be strictly positive and ascending. The void modulus is
    /// `1e-6 · min(youngs)`.
    pub fn new(youngs: Vec<f64>, penal: f64, nu: f64, thickness: f64) -> Result<Self> {
        if youngs.is_empty() || youngs.len() > MAX_VARS {
            return Err(Error::InvalidArgument(format!(
                "between 1 and {MAX_VARS} candidate materials are supported, got {}",
                youngs.len()
            )));
        }
        if youngs.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidArgument(
                "Young's moduli must be positive".into(),
            ));
        }
        if youngs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "Young's moduli must be strictly ascending".into(),
            ));
        }
        if !(penal >= 1.0 && penal.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "SIMP penalty must be at least 1, got {penal}"
            )));
        }
        if !(0.0..0.5).contains(&nu) {
            return Err(Error::InvalidArgument(format!(
                "Poisson's ratio must lie in [0, 0.5), got {nu}"
            )));
        }
        if !(thickness > 0.0 && thickness.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "thickness must be positive, got {thickness}"
            )));
        }
        let e_min = 1e-6 * youngs[0];
        Ok(MaterialSet {
            youngs,
            e_min,
            penal,
            nu,
            thickness,
        })
    }

    pub fn youngs(&self) -> &[f64] {
        &self.youngs
    }

    pub fn e_min(&self) -> f64 {
        self.e_min
    }

    pub fn e_max(&self) -> f64 {
        *self.youngs.last().expect("nonempty")
    }

    pub fn penal(&self) -> f64 {
        self.penal
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    /// Number of design variables per element.
    pub fn num_vars(&self) -> usize {
        self.youngs.len()
    }

    /// Same materials with every modulus multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        MaterialSet::new(
            self.youngs.iter().map(|e| e * factor).collect(),
            self.penal,
            self.nu,
            self.thickness,
        )
    }
}

fn check_row(design: &[f64], materials: &MaterialSet) -> Result<()> {
    if design.len() != materials.num_vars() {
        return Err(Error::InvalidArgument(format!(
            "expected {} design variables, got {}",
            materials.num_vars(),
            design.len()
        )));
    }
    if let Some(bad) = design.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::InvalidArgument(format!(
            "design variable {bad} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Nested levels `V_1..V_{m+1}` of the interpolation; `V_1` is the modulus.
fn levels(design: &[f64], materials: &MaterialSet) -> ([f64; MAX_VARS + 1], [f64; MAX_VARS]) {
    let m = design.len();
    let mut a = [0.0; MAX_VARS];
    for k in 0..m {
        a[k] = design[k].powf(materials.penal);
    }
    let mut v = [0.0; MAX_VARS + 1];
    v[m] = materials.youngs[m - 1];
    for k in (0..m).rev() {
        let base = if k == 0 {
            materials.e_min
        } else {
            materials.youngs[k - 1]
        };
        v[k] = (1.0 - a[k]) * base + a[k] * v[k + 1];
    }
    (v, a)
}

/// Extended SIMP modulus of one element from its filtered variables.
///
/// One variable gives the two-phase law, two variables the three-phase law
/// `(1-ρ₁ᵖ)E_min + ρ₁ᵖ((1-ρ₂ᵖ)E₁ + ρ₂ᵖE₂)`, three variables nest once more.
pub fn interpolate_modulus(design: &[f64], materials: &MaterialSet) -> Result<f64> {
    check_row(design, materials)?;
    Ok(levels(design, materials).0[0])
}

/// Partial derivatives of [`interpolate_modulus`] with respect to each variable.
pub fn modulus_derivatives(design: &[f64], materials: &MaterialSet) -> Result<Vec<f64>> {
    check_row(design, materials)?;
    let (v, a) = levels(design, materials);
    let p = materials.penal;
    let mut prefix = 1.0;
    let mut out = Vec::with_capacity(design.len());
    for k in 0..design.len() {
        let base = if k == 0 {
            materials.e_min
        } else {
            materials.youngs[k - 1]
        };
        let da = if p == 1.0 {
            1.0
        } else {
            p * design[k].powf(p - 1.0)
        };
        out.push(prefix * (v[k + 1] - base) * da);
        prefix *= a[k];
    }
    Ok(out)
}

/// Volume bounds of the linear constraints: `bound_k = Σ_{j ≥ k} v_fj`.
pub fn volume_bounds(fractions: &[f64]) -> Vec<f64> {
    (0..fractions.len())
        .map(|k| fractions[k..].iter().sum())
        .collect()
}

/// Density filter `ρ̃ = H ρ` stored row-wise.
#[derive(Debug, Clone)]
pub struct FilterOperator {
    radius: f64,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    weights: Vec<f64>,
}

/// Builds the distance-weighted, volume-weighted density filter.
pub fn build_filter(mesh: &Mesh, r_fill: f64) -> Result<FilterOperator> {
    let centroids = mesh.centroids();
    let areas = mesh.element_areas();
    FilterOperator::from_points(&centroids, &areas, r_fill)
}

impl FilterOperator {
    pub fn from_points(centroids: &[Point], volumes: &[f64], r_fill: f64) -> Result<Self> {
        if !(r_fill > 0.0 && r_fill.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "filter radius must be positive, got {r_fill}"
            )));
        }
        if centroids.len() != volumes.len() {
            return Err(Error::InvalidArgument(
                "centroid and volume counts differ".into(),
            ));
        }
        let n = centroids.len();
        let cell_of = |p: &Point| ((p[0] / r_fill).floor() as i64, (p[1] / r_fill).floor() as i64);
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (j, p) in centroids.iter().enumerate() {
            grid.entry(cell_of(p)).or_default().push(j);
        }

        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_ptr.push(0);
        for pi in centroids {
            let (cx, cy) = cell_of(pi);
            let mut row: Vec<(usize, f64)> = Vec::new();
            for gx in cx - 1..=cx + 1 {
                for gy in cy - 1..=cy + 1 {
                    let Some(bucket) = grid.get(&(gx, gy)) else {
                        continue;
                    };
                    for &j in bucket {
                        let d = (pi[0] - centroids[j][0]).hypot(pi[1] - centroids[j][1]);
                        let w = 1.0 - d / r_fill;
                        if w > 0.0 {
                            row.push((j, volumes[j] * w));
                        }
                    }
                }
            }
            row.sort_unstable_by_key(|&(j, _)| j);
            let total: f64 = row.iter().map(|&(_, w)| w).sum();
            for (j, w) in row {
                cols.push(j);
                weights.push(w / total);
            }
            row_ptr.push(cols.len());
        }
        if n > 1 && cols.len() == n {
            log::warn!(
                "filter radius {r_fill:e} is below the centroid spacing; \
                 the filter reduces to the identity"
            );
        }
        Ok(FilterOperator {
            radius: r_fill,
            row_ptr,
            cols,
            weights,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.weights.len()
    }

    /// Entries of row `i` as `(column, weight)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.weights[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, w)| w)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "vector length {len} does not match filter size {}",
                self.dim()
            )));
        }
        Ok(())
    }

    /// `H · raw`.
    pub fn apply(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.check_len(raw.len())?;
        let in_unit = raw.iter().all(|r| (0.0..=1.0).contains(r));
        Ok((0..self.dim())
            .map(|i| {
                let v: f64 = self.row(i).map(|(j, w)| w * raw[j]).sum();
                // convex combination; clamp roundoff past the bounds
                if in_unit {
                    v.clamp(0.0, 1.0)
                } else {
                    v
                }
            })
            .collect())
    }

    /// `Hᵀ · d_filtered`, the chain rule back to raw variables.
    pub fn chain(&self, d_filtered: &[f64]) -> Result<Vec<f64>> {
        self.check_len(d_filtered.len())?;
        let mut out = vec![0.0; self.dim()];
        for (i, &d) in d_filtered.iter().enumerate() {
            for (j, w) in self.row(i) {
                out[j] += w * d;
            }
        }
        Ok(out)
    }
}

pub fn apply_filter(filter: &FilterOperator, raw: &[f64]) -> Result<Vec<f64>> {
    filter.apply(raw)
}

pub fn chain_filter(filter: &FilterOperator, d_filtered: &[f64]) -> Result<Vec<f64>> {
    filter.chain(d_filtered)
}

/// Per-element design variables, raw and filtered, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignField {
    raw: Vec<Vec<f64>>,
    filtered: Vec<Vec<f64>>,
    volumes: Vec<f64>,
}

impl DesignField {
    /// `raw[k]` is the column of variable `k`; `volumes` are element volumes.
    pub fn new(raw: Vec<Vec<f64>>, volumes: Vec<f64>, filter: &FilterOperator) -> Result<Self> {
        if raw.is_empty() || raw.len() > MAX_VARS {
            return Err(Error::InvalidArgument(format!(
                "between 1 and {MAX_VARS} design variables per element are supported"
            )));
        }
        let n = volumes.len();
        if volumes.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidArgument("element volumes must be positive".into()));
        }
        let mut field = DesignField {
            raw: Vec::new(),
            filtered: Vec::new(),
            volumes,
        };
        for col in &raw {
            if col.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "design column has {} entries for {n} elements",
                    col.len()
                )));
            }
        }
        field.set_raw(raw, filter)?;
        Ok(field)
    }

    /// Every element set to the same values.
    pub fn uniform(values: &[f64], volumes: Vec<f64>, filter: &FilterOperator) -> Result<Self> {
        let n = volumes.len();
        DesignField::new(values.iter().map(|&v| vec![v; n]).collect(), volumes, filter)
    }

    /// Replaces the raw variables and refilters.
    pub fn set_raw(&mut self, raw: Vec<Vec<f64>>, filter: &FilterOperator) -> Result<()> {
        for col in &raw {
            if let Some(bad) = col.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                return Err(Error::InvalidArgument(format!(
                    "design variable {bad} outside [0, 1]"
                )));
            }
        }
        self.filtered = raw
            .iter()
            .map(|col| filter.apply(col))
            .collect::<Result<_>>()?;
        self.raw = raw;
        Ok(())
    }

    /// Replaces the raw variables from a flat vector `[col_0; col_1; ...]`.
    pub fn set_raw_flat(&mut self, flat: &[f64], filter: &FilterOperator) -> Result<()> {
        let n = self.num_elements();
        if flat.len() != n * self.num_vars() {
            return Err(Error::InvalidArgument(format!(
                "flat design has {} entries, expected {}",
                flat.len(),
                n * self.num_vars()
            )));
        }
        let cols = flat.chunks(n).map(|c| c.to_vec()).collect();
        self.set_raw(cols, filter)
    }

    pub fn num_elements(&self) -> usize {
        self.volumes.len()
    }

    pub fn num_vars(&self) -> usize {
        self.raw.len()
    }

    pub fn raw(&self) -> &[Vec<f64>] {
        &self.raw
    }

    pub fn filtered(&self) -> &[Vec<f64>] {
        &self.filtered
    }

    pub fn raw_flat(&self) -> Vec<f64> {
        self.raw.concat()
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// Filtered variables of element `e`, padded with zeros.
    pub fn filtered_row(&self, e: usize) -> [f64; MAX_VARS] {
        let mut row = [0.0; MAX_VARS];
        for (k, col) in self.filtered.iter().enumerate() {
            row[k] = col[e];
        }
        row
    }

    /// Hash of the filtered field, used to detect stale analysis states.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for col in &self.filtered {
            for v in col {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Density of each material phase per element: for two variables
    /// `ρ̃₁(1-ρ̃₂)` and `ρ̃₁ρ̃₂`, nesting likewise for three.
    pub fn material_densities(&self) -> Vec<Vec<f64>> {
        let m = self.num_vars();
        let n = self.num_elements();
        let mut out = vec![vec![0.0; n]; m];
        for e in 0..n {
            let row = self.filtered_row(e);
            let mut prefix = row[0];
            for k in 0..m {
                if k + 1 < m {
                    out[k][e] = prefix * (1.0 - row[k + 1]);
                    prefix *= row[k + 1];
                } else {
                    out[k][e] = prefix;
                }
            }
        }
        out
    }
}

/// Volume-weighted means of the filtered variables, `g_k = Σ v ρ̃_k / Σ v`.
pub fn volume_measures(design: &DesignField) -> Vec<f64> {
    let total: f64 = design.volumes.iter().sum();
    design
        .filtered
        .iter()
        .map(|col| {
            col.iter()
                .zip(&design.volumes)
                .map(|(r, v)| r * v)
                .sum::<f64>()
                / total
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, Mesh, MeshLayout};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_materials() -> MaterialSet {
        MaterialSet::new(vec![40e6, 100e6], 3.0, 0.4, 0.001).unwrap()
    }

    #[test]
    fn pure_phases() {
        let m = two_materials();
        assert_eq!(interpolate_modulus(&[1.0, 1.0], &m).unwrap(), 100e6);
        assert_eq!(interpolate_modulus(&[1.0, 0.0], &m).unwrap(), 40e6);
        for r2 in [0.0, 0.3, 1.0] {
            assert_eq!(interpolate_modulus(&[0.0, r2], &m).unwrap(), m.e_min());
        }
        assert_eq!(m.e_min(), 40.0);
    }

    #[test]
    fn half_half_hand_value() {
        let m = two_materials();
        let e = interpolate_modulus(&[0.5, 0.5], &m).unwrap();
        let hand = 0.875 * m.e_min() + 0.125 * (0.875 * 40e6 + 0.125 * 100e6);
        assert!((e - hand).abs() < 1e-6);
        assert!((e - 5.9375e6).abs() / 5.9375e6 < 1e-5);
    }

    #[test]
    fn derivative_special_cases() {
        let m = two_materials();
        let d = modulus_derivatives(&[0.0, 0.7], &m).unwrap();
        assert_eq!(d[1], 0.0);
        let r2: f64 = 0.6;
        let d = modulus_derivatives(&[1.0, r2], &m).unwrap();
        let expect = 3.0 * r2.powi(2) * (100e6 - 40e6);
        assert!((d[1] - expect).abs() < 1e-6 * expect);
    }

    #[test]
    fn derivatives_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sets = [
            MaterialSet::new(vec![1.0], 3.0, 0.3, 1.0).unwrap(),
            two_materials(),
            MaterialSet::new(vec![10e6, 40e6, 100e6], 3.0, 0.4, 0.001).unwrap(),
        ];
        let h = 1e-5;
        for m in &sets {
            for _ in 0..1000 {
                let x: Vec<f64> = (0..m.num_vars()).map(|_| rng.random_range(0.01..0.99)).collect();
                let d = modulus_derivatives(&x, m).unwrap();
                for k in 0..x.len() {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (interpolate_modulus(&xp, m).unwrap()
                        - interpolate_modulus(&xm, m).unwrap())
                        / (2.0 * h);
                    let scale = d[k].abs().max(1e-6 * m.e_max());
                    assert!((fd - d[k]).abs() / scale < 1e-6, "fd {fd} vs {}", d[k]);
                }
            }
        }
    }

    #[test]
    fn three_material_nesting() {
        let m = MaterialSet::new(vec![10e6, 40e6, 100e6], 3.0, 0.4, 0.001).unwrap();
        assert_eq!(interpolate_modulus(&[1.0, 0.0, 0.5], &m).unwrap(), 10e6);
        assert_eq!(interpolate_modulus(&[1.0, 1.0, 0.0], &m).unwrap(), 40e6);
        assert_eq!(interpolate_modulus(&[1.0, 1.0, 1.0], &m).unwrap(), 100e6);
        assert_eq!(interpolate_modulus(&[0.0, 1.0, 1.0], &m).unwrap(), 10.0);
    }

    #[test]
    fn rejects_out_of_range() {
        let m = two_materials();
        assert!(interpolate_modulus(&[1.1, 0.0], &m).is_err());
        assert!(modulus_derivatives(&[0.5, -0.1], &m).is_err());
        assert!(interpolate_modulus(&[0.5], &m).is_err());
        assert!(MaterialSet::new(vec![100e6, 40e6], 3.0, 0.4, 0.001).is_err());
        assert!(MaterialSet::new(vec![], 3.0, 0.4, 0.001).is_err());
    }

    #[test]
    fn monotone_in_topology_variable() {
        let m = two_materials();
        for r2 in [0.0, 0.25, 0.5, 1.0] {
            let mut prev = 0.0;
            for k in 0..=100 {
                let e = interpolate_modulus(&[k as f64 / 100.0, r2], &m).unwrap();
                assert!(e >= prev);
                assert!(e >= m.e_min() && e <= m.e_max());
                prev = e;
            }
        }
    }

    #[test]
    fn tiny_radius_gives_identity() {
        let mesh = generate_mesh(4, 3, 0.4, 0.3).unwrap();
        let f = build_filter(&mesh, 1e-4).unwrap();
        assert_eq!(f.nnz(), mesh.num_elements());
        for i in 0..f.dim() {
            assert_eq!(f.get(i, i), 1.0);
        }
    }

    /// Brute-force double loop over all element pairs.
    fn dense_filter(mesh: &Mesh, r: f64) -> Vec<Vec<f64>> {
        let c = mesh.centroids();
        let v = mesh.element_areas();
        let n = c.len();
        let mut h = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut den = 0.0;
            for j in 0..n {
                let d = ((c[i][0] - c[j][0]).powi(2) + (c[i][1] - c[j][1]).powi(2)).sqrt();
                let w = (1.0 - d / r).max(0.0);
                h[i][j] = v[j] * w;
                den += v[j] * w;
            }
            for j in 0..n {
                h[i][j] /= den;
            }
        }
        h
    }

    #[test]
    fn spike_matches_direct_evaluation() {
        let mesh = generate_mesh(3, 3, 0.3, 0.3).unwrap();
        let r = 1.5 * mesh.element_width();
        let f = build_filter(&mesh, r).unwrap();
        let mut spike = vec![0.0; 9];
        spike[4] = 1.0;
        let out = f.apply(&spike).unwrap();
        let dense = dense_filter(&mesh, r);
        for i in 0..9 {
            assert!((out[i] - dense[i][4]).abs() < 1e-14);
        }
        assert!(out[4] > 0.0 && out.iter().filter(|&&v| v > 0.0).count() > 1);
    }

    #[test]
    fn filter_products_match_dense_oracle() {
        let mesh = Mesh::generate(7, 6, 0.7, 0.5, MeshLayout::Symmetric).unwrap();
        let r = 2.5 * mesh.element_width();
        let f = build_filter(&mesh, r).unwrap();
        let dense = dense_filter(&mesh, r);
        let n = mesh.num_elements();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let hx = f.apply(&x).unwrap();
        let htx = f.chain(&x).unwrap();
        for i in 0..n {
            let row: f64 = (0..n).map(|j| dense[i][j] * x[j]).sum();
            let col: f64 = (0..n).map(|j| dense[j][i] * x[j]).sum();
            assert!((hx[i] - row).abs() < 1e-13);
            assert!((htx[i] - col).abs() < 1e-13);
            // zero beyond the radius
            for j in 0..n {
                if dense[i][j] == 0.0 {
                    assert_eq!(f.get(i, j), 0.0);
                }
            }
        }
        let row_sums: Vec<f64> = (0..n).map(|i| f.row(i).map(|(_, w)| w).sum()).collect();
        assert!(row_sums.iter().all(|s| (s - 1.0).abs() < 1e-12));
        // total sensitivity mass is preserved
        let s = vec![0.37; n];
        let total: f64 = f.chain(&s).unwrap().iter().sum();
        assert!((total - 0.37 * n as f64).abs() < 1e-12 * n as f64);
    }

    #[test]
    fn constants_pass_through() {
        let mesh = generate_mesh(6, 4, 0.6, 0.4).unwrap();
        let f = build_filter(&mesh, 2.0 * mesh.element_width()).unwrap();
        let n = mesh.num_elements();
        assert!(f.apply(&vec![0.0; n]).unwrap().iter().all(|&v| v == 0.0));
        assert!(f.apply(&vec![1.0; n]).unwrap().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(f.apply(&vec![0.3; n]).unwrap().iter().all(|&v| (v - 0.3).abs() < 1e-14));
        assert!(f.apply(&vec![0.3; n + 1]).is_err());
        assert!(f.chain(&vec![0.3; n - 1]).is_err());
        let id = build_filter(&mesh, 1e-9).unwrap();
        let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        assert_eq!(id.chain(&x).unwrap(), x);
    }

    #[test]
    fn volume_measures_for_uniform_and_random_fields() {
        let mesh = generate_mesh(5, 4, 0.5, 0.4).unwrap();
        let f = build_filter(&mesh, 1.5 * mesh.element_width()).unwrap();
        let vols = mesh.element_areas();
        let d = DesignField::uniform(&[0.0, 0.5], vols.clone(), &f).unwrap();
        assert_eq!(volume_measures(&d)[0], 0.0);
        let d = DesignField::uniform(&[1.0, 0.1], vols.clone(), &f).unwrap();
        let g = volume_measures(&d);
        assert!((g[0] - 1.0).abs() < 1e-14 && (g[1] - 0.1).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = vols.len();
        let cols: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
        let d = DesignField::new(cols, vols.clone(), &f).unwrap();
        let g = volume_measures(&d);
        let total: f64 = vols.iter().sum();
        for k in 0..2 {
            let mut brute = 0.0;
            for e in 0..n {
                brute += vols[e] * d.filtered()[k][e];
            }
            assert!((g[k] - brute / total).abs() < 1e-13);
        }
    }

    #[test]
    fn bounds_and_material_densities() {
        assert_eq!(volume_bounds(&[0.1, 0.1]), vec![0.2, 0.1]);
        let b = volume_bounds(&[0.1, 0.1, 0.05]);
        assert!((b[0] - 0.25).abs() < 1e-15 && (b[1] - 0.15).abs() < 1e-15 && b[2] == 0.05);

        let mesh = generate_mesh(2, 1, 0.2, 0.1).unwrap();
        let f = build_filter(&mesh, 1e-6).unwrap();
        let d = DesignField::new(
            vec![vec![0.8, 1.0], vec![0.25, 1.0], vec![0.5, 0.0]],
            mesh.element_areas(),
            &f,
        )
        .unwrap();
        let m = d.material_densities();
        assert!((m[0][0] - 0.6).abs() < 1e-15);
        assert!((m[1][0] - 0.1).abs() < 1e-15);
        assert!((m[2][0] - 0.1).abs() < 1e-15);
        assert_eq!((m[0][1], m[1][1], m[2][1]), (0.0, 1.0, 0.0));
    }
}
