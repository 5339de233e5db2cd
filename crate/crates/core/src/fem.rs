//! Euler-Bernoulli beam finite elements on the device mesh.
//!
//! Two DOFs per node (transverse displacement w, rotation theta), Hermite
//! cubic shape functions, consistent load vectors, and a symmetric banded
//! LDL^T direct solver. The transverse displacement is positive away from
//! the substrate, so electrostatic loads are negative.
//!
//! The global matrix of a 1D beam chain couples node i only with node i+1,
//! giving a fixed half-bandwidth of 3 in DOF indices; the band solver keeps
//! every solve deterministic and O(n).

use thiserror::Error;

use crate::device::Mesh;

/// Errors from assembly and linear solves.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("{name} must be positive, got {value:.3e}")]
    NonPositiveDimension { name: &'static str, value: f64 },
    #[error("system is singular (pivot {pivot:.3e} at dof {dof}); constraints insufficient")]
    SingularSystem { dof: usize, pivot: f64 },
}

/// Half-bandwidth of the beam chain in DOF indices.
pub const HALF_BANDWIDTH: usize = 3;

/// Symmetric banded matrix storing the upper band row-wise:
/// `data[i * (hbw+1) + j] = A[i, i+j]` for `j <= hbw`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBandMatrix {
    n: usize,
    hbw: usize,
    data: Vec<f64>,
}

impl SymBandMatrix {
    pub fn zeros(n: usize, hbw: usize) -> Self {
        Self {
            n,
            hbw,
            data: vec![0.0; n * (hbw + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if hi - lo > self.hbw {
            0.0
        } else {
            self.data[lo * (self.hbw + 1) + (hi - lo)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if i > j {
            return; // symmetric: store upper triangle only
        }
        debug_assert!(j - i <= self.hbw);
        self.data[i * (self.hbw + 1) + (j - i)] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        if i > j {
            return;
        }
        debug_assert!(j - i <= self.hbw);
        self.data[i * (self.hbw + 1) + (j - i)] = v;
    }

    /// y_i = sum_j |A_ij| |x_j|; bounds the rounding error of `mul_vec`.
    pub fn mul_vec_abs(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = self.data[i * (self.hbw + 1)].abs() * x[i].abs();
            for j in 1..=self.hbw {
                if i + j < self.n {
                    let a = self.data[i * (self.hbw + 1) + j].abs();
                    acc += a * x[i + j].abs();
                    y[i + j] += a * x[i].abs();
                }
            }
            y[i] += acc;
        }
        y
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = self.data[i * (self.hbw + 1)] * x[i];
            for j in 1..=self.hbw {
                if i + j < self.n {
                    let a = self.data[i * (self.hbw + 1) + j];
                    acc += a * x[i + j];
                    y[i + j] += a * x[i];
                }
            }
            y[i] += acc;
        }
        y
    }

    /// Zeroes row and column `d` (within the band) and puts 1 on the diagonal.
    /// Standard Dirichlet elimination; the right-hand side must be adjusted
    /// by the caller before this is applied.
    pub fn eliminate_dof(&mut self, d: usize) {
        for j in 0..=self.hbw {
            self.data[d * (self.hbw + 1) + j] = 0.0;
            if d >= j && j > 0 {
                self.data[(d - j) * (self.hbw + 1) + j] = 0.0;
            }
        }
        self.data[d * (self.hbw + 1)] = 1.0;
    }

    /// In-place LDL^T factorization. Returns the factor together with the
    /// inertia information needed for fold detection.
    pub fn factor(&self) -> Result<BandFactor, FemError> {
        let n = self.n;
        let hbw = self.hbw;
        let w = hbw + 1;
        // l[i*w + j] holds L[i, i-j] for j=1..=hbw (lower band), diag in d.
        let mut l = vec![0.0; n * w];
        let mut d = vec![0.0; n];
        let mut nonpositive = 0usize;
        for i in 0..n {
            let lo = i.saturating_sub(hbw);
            // L[i][k] for k in lo..i
            for k in lo..i {
                // a_ki stored at row k offset i-k
                let mut v = self.data[k * w + (i - k)];
                let mlo = i.saturating_sub(hbw).max(k.saturating_sub(hbw));
                for m in mlo..k {
                    v -= l[i * w + (i - m)] * d[m] * l[k * w + (k - m)];
                }
                l[i * w + (i - k)] = v / d[k];
            }
            let diag = self.data[i * w];
            let mut v = diag;
            for m in lo..i {
                let lim = l[i * w + (i - m)];
                v -= lim * lim * d[m];
            }
            if v <= 0.0 {
                nonpositive += 1;
            }
            // Pivot collapse relative to the row's own diagonal scale marks
            // a (numerically) singular system.
            if v.abs() <= 1e-13 * diag.abs() {
                return Err(FemError::SingularSystem { dof: i, pivot: v });
            }
            d[i] = v;
        }
        Ok(BandFactor {
            n,
            hbw,
            l,
            d,
            nonpositive_pivots: nonpositive,
        })
    }
}

/// LDL^T factor of a [`SymBandMatrix`].
#[derive(Debug, Clone)]
pub struct BandFactor {
    n: usize,
    hbw: usize,
    l: Vec<f64>,
    d: Vec<f64>,
    /// Number of non-positive pivots; by Sylvester's law this equals the
    /// number of non-positive eigenvalues, so 0 means positive definite.
    pub nonpositive_pivots: usize,
}

impl BandFactor {
    pub fn is_positive_definite(&self) -> bool {
        self.nonpositive_pivots == 0
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let w = self.hbw + 1;
        let mut x = b.to_vec();
        // Forward: L z = b
        for i in 0..self.n {
            let lo = i.saturating_sub(self.hbw);
            let mut v = x[i];
            for m in lo..i {
                v -= self.l[i * w + (i - m)] * x[m];
            }
            x[i] = v;
        }
        // Diagonal
        for i in 0..self.n {
            x[i] /= self.d[i];
        }
        // Backward: L^T x = z
        for i in (0..self.n).rev() {
            let hi = (i + self.hbw).min(self.n - 1);
            let mut v = x[i];
            for m in (i + 1)..=hi {
                v -= self.l[m * w + (m - i)] * x[m];
            }
            x[i] = v;
        }
        x
    }
}

/// Nodal transverse displacements and rotations on a beam mesh.
///
/// DOF layout: `[w_0, theta_0, w_1, theta_1, ...]`, displacement positive
/// away from the substrate.
#[derive(Debug, Clone, PartialEq)]
pub struct DeflectionField {
    dofs: Vec<f64>,
}

impl DeflectionField {
    pub fn zeros(n_nodes: usize) -> Self {
        Self {
            dofs: vec![0.0; 2 * n_nodes],
        }
    }

    pub fn from_dofs(dofs: Vec<f64>) -> Self {
        debug_assert!(dofs.len() % 2 == 0);
        Self { dofs }
    }

    pub fn n_nodes(&self) -> usize {
        self.dofs.len() / 2
    }

    pub fn dofs(&self) -> &[f64] {
        &self.dofs
    }

    pub fn dofs_mut(&mut self) -> &mut [f64] {
        &mut self.dofs
    }

    /// Transverse displacement at a node (m), positive away from the substrate.
    #[inline]
    pub fn w(&self, node: usize) -> f64 {
        self.dofs[2 * node]
    }

    /// Rotation at a node (rad).
    #[inline]
    pub fn theta(&self, node: usize) -> f64 {
        self.dofs[2 * node + 1]
    }

    /// Downward displacement (toward the substrate) at a node, >= 0 when the
    /// node moved down.
    #[inline]
    pub fn depth(&self, node: usize) -> f64 {
        -self.w(node)
    }

    /// Hermite interpolation of w at the midpoint of an element.
    pub fn w_mid(&self, n1: usize, le: f64) -> f64 {
        0.5 * (self.w(n1) + self.w(n1 + 1)) + le / 8.0 * (self.theta(n1) - self.theta(n1 + 1))
    }

    /// Largest |w| over nodes, signed by direction (negative = toward the
    /// substrate).
    pub fn peak_signed(&self) -> f64 {
        let mut peak = 0.0f64;
        for node in 0..self.n_nodes() {
            let w = self.w(node);
            if w.abs() > peak.abs() {
                peak = w;
            }
        }
        peak
    }

    /// Largest downward displacement over nodes (>= 0).
    pub fn max_depth(&self) -> f64 {
        (0..self.n_nodes()).fold(0.0f64, |acc, n| acc.max(self.depth(n)))
    }

    /// Largest upward displacement over nodes (>= 0).
    pub fn max_up(&self) -> f64 {
        (0..self.n_nodes()).fold(0.0f64, |acc, n| acc.max(self.w(n)))
    }

    pub fn all_finite(&self) -> bool {
        self.dofs.iter().all(|v| v.is_finite())
    }
}

/// Standard Hermite-cubic beam element stiffness for rigidity EI and
/// length le. DOF order `[w1, theta1, w2, theta2]`.
pub fn element_stiffness(rigidity: f64, le: f64) -> Result<[[f64; 4]; 4], FemError> {
    if !(rigidity > 0.0) {
        return Err(FemError::NonPositiveDimension {
            name: "rigidity",
            value: rigidity,
        });
    }
    if !(le > 0.0) {
        return Err(FemError::NonPositiveDimension {
            name: "element length",
            value: le,
        });
    }
    let c = rigidity / (le * le * le);
    let l = le;
    Ok([
        [12.0 * c, 6.0 * l * c, -12.0 * c, 6.0 * l * c],
        [6.0 * l * c, 4.0 * l * l * c, -6.0 * l * c, 2.0 * l * l * c],
        [-12.0 * c, -6.0 * l * c, 12.0 * c, -6.0 * l * c],
        [6.0 * l * c, 2.0 * l * l * c, -6.0 * l * c, 4.0 * l * l * c],
    ])
}

/// Consistent load vector of a uniform transverse traction q (N/m) over one
/// element: total force q*le, end moments q*le^2/12.
pub fn element_consistent_load(q: f64, le: f64) -> [f64; 4] {
    [
        q * le / 2.0,
        q * le * le / 12.0,
        q * le / 2.0,
        -q * le * le / 12.0,
    ]
}

/// Consistent matrix of a uniform elastic foundation k (N/m^2) over one
/// element; also serves as the symmetric linearization of a distributed
/// load density derivative.
pub fn element_foundation(k: f64, le: f64) -> [[f64; 4]; 4] {
    let c = k * le / 420.0;
    let l = le;
    [
        [156.0 * c, 22.0 * l * c, 54.0 * c, -13.0 * l * c],
        [
            22.0 * l * c,
            4.0 * l * l * c,
            13.0 * l * c,
            -3.0 * l * l * c,
        ],
        [54.0 * c, 13.0 * l * c, 156.0 * c, -22.0 * l * c],
        [
            -13.0 * l * c,
            -3.0 * l * l * c,
            -22.0 * l * c,
            4.0 * l * l * c,
        ],
    ]
}

#[inline]
fn element_dofs(n1: usize) -> [usize; 4] {
    [2 * n1, 2 * n1 + 1, 2 * n1 + 2, 2 * n1 + 3]
}

/// Assembles the global bending stiffness of the mesh. Elements are summed
/// in index order, so the result is bitwise deterministic.
pub fn assemble(mesh: &Mesh) -> SymBandMatrix {
    let mut k = SymBandMatrix::zeros(mesh.n_dofs(), HALF_BANDWIDTH);
    for e in &mesh.elements {
        let ke = element_stiffness(e.rigidity, e.length).expect("mesh has positive dimensions");
        add_element(&mut k, e.n1, &ke);
    }
    k
}

/// Adds a 4x4 element matrix into the global band at element `n1`.
pub fn add_element(k: &mut SymBandMatrix, n1: usize, ke: &[[f64; 4]; 4]) {
    let dofs = element_dofs(n1);
    for (a, &ga) in dofs.iter().enumerate() {
        for (b, &gb) in dofs.iter().enumerate() {
            if ga <= gb {
                k.add(ga, gb, ke[a][b]);
            }
        }
    }
}

/// Assembles the consistent global load vector of a per-element uniform
/// traction (N/m, one value per element).
pub fn assemble_traction_load(mesh: &Mesh, traction: &[f64]) -> Vec<f64> {
    debug_assert_eq!(traction.len(), mesh.elements.len());
    let mut f = vec![0.0; mesh.n_dofs()];
    for (e, &q) in mesh.elements.iter().zip(traction) {
        let fe = element_consistent_load(q, e.length);
        let dofs = element_dofs(e.n1);
        for (a, &ga) in dofs.iter().enumerate() {
            f[ga] += fe[a];
        }
    }
    f
}

/// Result of a constrained linear solve.
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub deflection: DeflectionField,
    /// `(dof, reaction)` for every constrained DOF: the force the support
    /// exerts on the beam (N for w-DOFs, N m for theta-DOFs).
    pub reactions: Vec<(usize, f64)>,
}

/// Solves K u = f with the listed DOFs pinned to zero and optional extra
/// per-DOF springs added to the diagonal.
pub fn solve_constrained(
    k: &SymBandMatrix,
    fixed_dofs: &[usize],
    load: &[f64],
    extra_springs: Option<&[f64]>,
) -> Result<LinearSolution, FemError> {
    let sol = solve_with_prescribed(
        k,
        &fixed_dofs.iter().map(|&d| (d, 0.0)).collect::<Vec<_>>(),
        load,
        extra_springs,
    )?;
    Ok(sol)
}

/// Solves K u = f with prescribed displacement values at the given DOFs.
pub fn solve_with_prescribed(
    k: &SymBandMatrix,
    prescribed: &[(usize, f64)],
    load: &[f64],
    extra_springs: Option<&[f64]>,
) -> Result<LinearSolution, FemError> {
    // A free-free beam chain has two rigid-body modes; the constraints must
    // remove both (two pinned displacements, or one displacement plus one
    // rotation). Mixed w/theta scales make this unreliable to detect from
    // pivots alone.
    let has_spring_support = extra_springs.is_some_and(|s| s.iter().any(|&v| v > 0.0));
    if !has_spring_support {
        let w_nodes: std::collections::BTreeSet<usize> = prescribed
            .iter()
            .filter(|(d, _)| d % 2 == 0)
            .map(|(d, _)| d / 2)
            .collect();
        let has_theta = prescribed.iter().any(|(d, _)| d % 2 == 1);
        if w_nodes.len() < 2 && !(w_nodes.len() == 1 && has_theta) {
            return Err(FemError::SingularSystem {
                dof: prescribed.first().map(|&(d, _)| d).unwrap_or(0),
                pivot: 0.0,
            });
        }
    }
    let n = k.n();
    let mut a = k.clone();
    if let Some(springs) = extra_springs {
        for (d, &s) in springs.iter().enumerate() {
            if s != 0.0 {
                a.add(d, d, s);
            }
        }
    }
    let mut rhs = load.to_vec();
    // Move prescribed columns to the right-hand side, then eliminate.
    for &(d, v) in prescribed {
        if v != 0.0 {
            for i in d.saturating_sub(HALF_BANDWIDTH)..(d + HALF_BANDWIDTH + 1).min(n) {
                if i != d {
                    rhs[i] -= a.get(i, d) * v;
                }
            }
        }
    }
    for &(d, v) in prescribed {
        a.eliminate_dof(d);
        rhs[d] = v;
    }
    let factor = a.factor()?;
    let u = factor.solve(&rhs);

    // Reactions from the unmodified operator: r = (K + springs) u - f.
    let mut ku = k.mul_vec(&u);
    if let Some(springs) = extra_springs {
        for (d, &s) in springs.iter().enumerate() {
            ku[d] += s * u[d];
        }
    }
    let reactions = prescribed
        .iter()
        .map(|&(d, _)| (d, ku[d] - load[d]))
        .collect();
    Ok(LinearSolution {
        deflection: DeflectionField::from_dofs(u),
        reactions,
    })
}

/// Pinned-support DOF list for a mesh resting on its pillars (w = 0 there,
/// rotation free).
pub fn pillar_pin_dofs(mesh: &Mesh) -> Vec<usize> {
    mesh.pillar_nodes.iter().map(|&n| 2 * n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{presets, validate_spec, ContactSpec, DeviceSpec, WidthSegment};
    use proptest::prelude::*;

    /// Plain rectangular test beam with supports chosen per test.
    fn uniform_beam(n_elements: usize) -> (crate::device::ValidatedSpec, Mesh) {
        let mut spec: DeviceSpec = presets::switch_1um();
        spec.geometry.width_segments = vec![WidthSegment {
            x_start: 0.0,
            x_end: spec.geometry.length,
            width: 250e-6,
        }];
        spec.electrodes.clear();
        spec.contacts = ContactSpec {
            positions: vec![],
            stop_height: spec.gap,
        };
        let v = validate_spec(spec).unwrap();
        let mesh = build_mesh_panic(&v, n_elements);
        (v, mesh)
    }

    fn build_mesh_panic(v: &crate::device::ValidatedSpec, n: usize) -> Mesh {
        crate::device::build_mesh(v, n).unwrap()
    }

    #[test]
    fn element_stiffness_textbook_entry() {
        let ei = 2.5;
        let le = 0.4;
        let ke = element_stiffness(ei, le).unwrap();
        assert!((ke[0][0] - 12.0 * ei / le.powi(3)).abs() < 1e-12);
        assert!((ke[2][2] - 12.0 * ei / le.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn element_stiffness_symmetric_and_rigid_body_nullspace() {
        let ke = element_stiffness(1.7e-12, 1.3e-6).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((ke[i][j] - ke[j][i]).abs() <= 1e-12 * ke[0][0].abs());
            }
        }
        let le = 1.3e-6;
        // Pure translation and rotation about the element midpoint.
        let translation = [1.0, 0.0, 1.0, 0.0];
        let rotation = [-le / 2.0, 1.0, le / 2.0, 1.0];
        for v in [translation, rotation] {
            for i in 0..4 {
                let r: f64 = (0..4).map(|j| ke[i][j] * v[j]).sum();
                assert!(r.abs() <= 1e-9 * ke[0][0].abs(), "row {i}: {r}");
            }
        }
    }

    #[test]
    fn element_stiffness_rejects_bad_input() {
        assert!(matches!(
            element_stiffness(0.0, 1.0),
            Err(FemError::NonPositiveDimension { .. })
        ));
        assert!(matches!(
            element_stiffness(1.0, -1.0),
            Err(FemError::NonPositiveDimension { .. })
        ));
    }

    #[test]
    fn assembly_superposes_interior_node() {
        let (_, mesh) = uniform_beam(10);
        let k = assemble(&mesh);
        let e = &mesh.elements[0];
        let kij = 12.0 * e.rigidity / e.length.powi(3);
        // Interior node shared by two equal elements.
        let interior = mesh
            .elements
            .windows(2)
            .position(|p| (p[0].length - p[1].length).abs() < 1e-18)
            .map(|i| mesh.elements[i].n2)
            .unwrap();
        let le = mesh.elements[interior - 1].length;
        let ei = mesh.elements[interior - 1].rigidity;
        assert!(
            (k.get(2 * interior, 2 * interior) - 24.0 * ei / le.powi(3)).abs() < 1e-6 * kij.abs()
        );
    }

    #[test]
    fn free_free_assembly_has_two_rigid_body_modes() {
        let (_, mesh) = uniform_beam(20);
        let k = assemble(&mesh);
        let n = mesh.n_nodes();
        // Translation and rotation about x=0 are in the nullspace.
        let mut translation = vec![0.0; 2 * n];
        let mut rotation = vec![0.0; 2 * n];
        for i in 0..n {
            translation[2 * i] = 1.0;
            rotation[2 * i] = mesh.nodes[i];
            rotation[2 * i + 1] = 1.0;
        }
        let scale = k.get(0, 0) * mesh.nodes.last().unwrap();
        for v in [&translation, &rotation] {
            let r = k.mul_vec(v);
            let norm = r.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            assert!(norm <= 1e-9 * scale.abs(), "rigid-body residual {norm}");
        }
        // Two independent pins restore definiteness.
        let sol = solve_constrained(&k, &[2 * 0, 2 * (n / 2)], &vec![0.0; 2 * n], None);
        assert!(sol.is_ok());
    }

    #[test]
    fn assembly_is_deterministic() {
        let (_, mesh) = uniform_beam(50);
        let a = assemble(&mesh);
        let b = assemble(&mesh);
        assert_eq!(a, b);
    }

    #[test]
    fn cantilever_uniform_load_matches_closed_form() {
        let (v, mesh) = uniform_beam(200);
        let k = assemble(&mesh);
        let q = -2.5e-3; // N/m downward
        let f = assemble_traction_load(&mesh, &vec![q; mesh.elements.len()]);
        // Clamp the left end: w and theta.
        let sol = solve_constrained(&k, &[0, 1], &f, None).unwrap();
        let l = v.geometry().length;
        let ei = mesh.elements[0].rigidity;
        let expect = q * l.powi(4) / (8.0 * ei);
        let tip = sol.deflection.w(mesh.n_nodes() - 1);
        let rel = ((tip - expect) / expect).abs();
        assert!(rel < 5e-3, "tip {tip:.6e} vs {expect:.6e} (rel {rel:.2e})");
    }

    #[test]
    fn cantilever_uniform_load_nodally_exact() {
        // Hermite elements with consistent loads are nodally exact for
        // uniform load; at a modest condition number the error sits at
        // rounding scale.
        let (v, mesh) = uniform_beam(20);
        let k = assemble(&mesh);
        let q = -2.5e-3;
        let f = assemble_traction_load(&mesh, &vec![q; mesh.elements.len()]);
        let sol = solve_constrained(&k, &[0, 1], &f, None).unwrap();
        let l = v.geometry().length;
        let ei = mesh.elements[0].rigidity;
        let expect = q * l.powi(4) / (8.0 * ei);
        let tip = sol.deflection.w(mesh.n_nodes() - 1);
        let rel = ((tip - expect) / expect).abs();
        assert!(rel < 1e-9, "expected machine-scale error, got {rel:.2e}");
    }

    #[test]
    fn simply_supported_midspan_matches_closed_form() {
        let (v, mesh) = uniform_beam(200);
        let k = assemble(&mesh);
        let q = -1.0e-3;
        let f = assemble_traction_load(&mesh, &vec![q; mesh.elements.len()]);
        let last = mesh.n_nodes() - 1;
        let sol = solve_constrained(&k, &[0, 2 * last], &f, None).unwrap();
        let l = v.geometry().length;
        let ei = mesh.elements[0].rigidity;
        let expect = 5.0 * q * l.powi(4) / (384.0 * ei);
        // Midspan node exists: uniform even discretization.
        let mid = mesh
            .nodes
            .iter()
            .position(|&x| (x - l / 2.0).abs() < 1e-12)
            .unwrap();
        let got = sol.deflection.w(mid);
        let rel = ((got - expect) / expect).abs();
        assert!(rel < 5e-3, "midspan {got:.6e} vs {expect:.6e}");
    }

    #[test]
    fn zero_load_gives_zero_deflection() {
        let (_, mesh) = uniform_beam(50);
        let k = assemble(&mesh);
        let sol = solve_constrained(&k, &[0, 1], &vec![0.0; mesh.n_dofs()], None).unwrap();
        assert!(sol.deflection.dofs().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn insufficient_constraints_singular() {
        let (_, mesh) = uniform_beam(20);
        let k = assemble(&mesh);
        let f = vec![0.0; mesh.n_dofs()];
        // A single pinned w leaves the rotation rigid-body mode.
        assert!(matches!(
            solve_constrained(&k, &[0], &f, None),
            Err(FemError::SingularSystem { .. })
        ));
    }

    #[test]
    fn reactions_balance_applied_load() {
        let (_, mesh) = uniform_beam(120);
        let k = assemble(&mesh);
        let q = -3.7e-3;
        let f = assemble_traction_load(&mesh, &vec![q; mesh.elements.len()]);
        let pins = pillar_pin_dofs(&mesh);
        let sol = solve_constrained(&k, &pins, &f, None).unwrap();
        let total_load: f64 = f.iter().step_by(2).sum();
        let total_reaction: f64 = sol.reactions.iter().map(|&(_, r)| r).sum();
        assert!(
            (total_reaction - (-total_load)).abs() <= 1e-9 * total_load.abs(),
            "reactions {total_reaction:.6e} vs load {total_load:.6e}"
        );
    }

    #[test]
    fn load_integral_matches_traction() {
        let (v, mesh) = uniform_beam(73);
        let q = -1.3e-2;
        let f = assemble_traction_load(&mesh, &vec![q; mesh.elements.len()]);
        let total: f64 = f.iter().step_by(2).sum();
        let expect = q * v.geometry().length;
        assert!((total - expect).abs() <= 1e-10 * expect.abs());
    }

    #[test]
    fn symmetric_load_gives_symmetric_deflection() {
        let (_, mesh) = uniform_beam(100);
        let k = assemble(&mesh);
        let q = -2.0e-3;
        let f = assemble_traction_load(&mesh, &vec![q; mesh.elements.len()]);
        let pins = pillar_pin_dofs(&mesh);
        let sol = solve_constrained(&k, &pins, &f, None).unwrap();
        let n = mesh.n_nodes();
        let peak = sol.deflection.peak_signed().abs();
        for i in 0..n {
            let a = sol.deflection.w(i);
            let b = sol.deflection.w(n - 1 - i);
            assert!((a - b).abs() <= 1e-9 * peak, "node {i}: {a} vs {b}");
        }
    }

    #[test]
    fn midpoint_sampling_converges_at_second_order() {
        // Linearly varying load sampled as per-element constants converges
        // at O(le^2); halving the element size must cut the error by ~4.
        let tip_error = |n: usize| -> f64 {
            let (v, mesh) = uniform_beam(n);
            let l = v.geometry().length;
            let q0 = -1.0e-2;
            let traction: Vec<f64> = mesh
                .elements
                .iter()
                .map(|e| {
                    let mid = 0.5 * (mesh.nodes[e.n1] + mesh.nodes[e.n2]);
                    q0 * mid / l
                })
                .collect();
            let k = assemble(&mesh);
            let f = assemble_traction_load(&mesh, &traction);
            let sol = solve_constrained(&k, &[0, 1], &f, None).unwrap();
            let ei = mesh.elements[0].rigidity;
            let expect = 11.0 * q0 * l.powi(4) / (120.0 * ei);
            (sol.deflection.w(mesh.n_nodes() - 1) - expect).abs()
        };
        let e1 = tip_error(40);
        let e2 = tip_error(80);
        assert!(e1 / e2 >= 3.8, "convergence ratio {}", e1 / e2);
    }

    #[test]
    fn prescribed_displacement_reactions() {
        let (_, mesh) = uniform_beam(60);
        let k = assemble(&mesh);
        let pins = pillar_pin_dofs(&mesh);
        let mut prescribed: Vec<(usize, f64)> = pins.iter().map(|&d| (d, 0.0)).collect();
        let mid = mesh.n_nodes() / 2;
        prescribed.push((2 * mid, -0.5e-6));
        let sol = solve_with_prescribed(&k, &prescribed, &vec![0.0; mesh.n_dofs()], None).unwrap();
        // Pushing the midspan down requires a downward force there.
        let r_mid = sol
            .reactions
            .iter()
            .find(|&&(d, _)| d == 2 * mid)
            .unwrap()
            .1;
        assert!(r_mid < 0.0);
        // Doubling the prescribed depth doubles the reaction (linearity).
        prescribed.pop();
        prescribed.push((2 * mid, -1.0e-6));
        let sol2 = solve_with_prescribed(&k, &prescribed, &vec![0.0; mesh.n_dofs()], None).unwrap();
        let r_mid2 = sol2
            .reactions
            .iter()
            .find(|&&(d, _)| d == 2 * mid)
            .unwrap()
            .1;
        assert!((r_mid2 - 2.0 * r_mid).abs() <= 1e-9 * r_mid.abs());
    }

    proptest! {
        #[test]
        fn band_matvec_matches_dense(seed in 0u64..1000) {
            // Small random SPD-ish band matrix: A = B + B^T + shift.
            let n = 12usize;
            let mut a = SymBandMatrix::zeros(n, HALF_BANDWIDTH);
            let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let mut rnd = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            };
            let mut dense = vec![vec![0.0f64; n]; n];
            for i in 0..n {
                for j in i..(i + HALF_BANDWIDTH + 1).min(n) {
                    let v = if i == j { 10.0 + rnd().abs() } else { rnd() };
                    a.set(i, j, v);
                    dense[i][j] = v;
                    dense[j][i] = v;
                }
            }
            let x: Vec<f64> = (0..n).map(|_| rnd()).collect();
            let y = a.mul_vec(&x);
            for i in 0..n {
                let expect: f64 = (0..n).map(|j| dense[i][j] * x[j]).sum();
                prop_assert!((y[i] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
            }
            // Factor + solve round-trip.
            let f = a.factor().unwrap();
            prop_assert!(f.is_positive_definite());
            let sol = f.solve(&y);
            for i in 0..n {
                prop_assert!((sol[i] - x[i]).abs() < 1e-9);
            }
        }

        #[test]
        fn assembled_matrix_is_positive_semidefinite(n_el in 10usize..60, seed in 0u64..100) {
            let (_, mesh) = uniform_beam(n_el);
            let k = assemble(&mesh);
            let nd = mesh.n_dofs();
            let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let mut rnd = || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            };
            // Mixed-unit DOFs: scale rotations by a length to keep the
            // quadratic form balanced.
            let le = mesh.elements[0].length;
            let u: Vec<f64> = (0..nd)
                .map(|d| if d % 2 == 0 { rnd() } else { rnd() / le })
                .collect();
            let ku = k.mul_vec(&u);
            let quad: f64 = u.iter().zip(&ku).map(|(a, b)| a * b).sum();
            let scale: f64 = u
                .iter()
                .zip(&ku)
                .map(|(a, b)| (a * b).abs())
                .sum::<f64>()
                .max(1e-30);
            prop_assert!(quad >= -1e-10 * scale);
        }
    }
}
