use super::mesh::{BoundaryRegime, Mesh};
use crate::coefficients::DegeneracyCoefficient;
use crate::error::{LabError, Result};

/// Flux-form stiffness `S` for `−(a u_x)_x` on the unknown nodes.
///
/// `(S u)_i = k_{i−1/2}(u_i − u_{i−1}) + k_{i+1/2}(u_i − u_{i+1})` with
/// `k_{i+1/2} = a(x_{i+1/2}) / (x_{i+1} − x_i)`; the discrete operator is
/// `A = M⁻¹ S` with `M` the diagonal of dual-cell widths, so `A` is
/// self-adjoint and positive semidefinite in the mesh-weighted inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOperator {
    mesh: Mesh,
    regime: BoundaryRegime,
    face_conductance: Vec<f64>,
}

/// Assembles the operator for a degenerate coefficient.
pub fn assemble_diffusion(
    coef: &DegeneracyCoefficient,
    mesh: &Mesh,
    regime: BoundaryRegime,
) -> Result<DiffusionOperator> {
    assemble_with(|x| coef.eval(x), mesh, regime)
}

/// Assembles the operator for any face-sampled diffusivity.
pub fn assemble_with<F: Fn(f64) -> f64>(
    a: F,
    mesh: &Mesh,
    regime: BoundaryRegime,
) -> Result<DiffusionOperator> {
    let face_conductance = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(i, &xf)| {
            let value = a(xf);
            if value > 0.0 && value.is_finite() {
                Ok(value / mesh.spacing(i))
            } else {
                Err(LabError::NonPositiveCoefficient { x: xf, value })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiffusionOperator {
        mesh: mesh.clone(),
        regime,
        face_conductance,
    })
}

impl DiffusionOperator {
    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn regime(&self) -> BoundaryRegime {
        self.regime
    }

    /// `a(x_{i+1/2}) / (x_{i+1} − x_i)` for every face.
    pub fn face_conductance(&self) -> &[f64] {
        &self.face_conductance
    }

    /// Range of unknown node indices.
    pub fn unknowns(&self) -> std::ops::Range<usize> {
        self.regime.first_unknown()..self.mesh.intervals()
    }

    /// Tridiagonal rows of `S` over the unknowns: (sub, diag, super) with
    /// `sub[0]` and `super[last]` unused.
    pub fn stiffness_rows(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k = &self.face_conductance;
        let range = self.unknowns();
        let n = range.len();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for (r, i) in range.enumerate() {
            // node 0 has no left face: the boundary flux is zero
            let left = if i == 0 { 0.0 } else { k[i - 1] };
            diag[r] = left + k[i];
            if r > 0 {
                sub[r] = -k[i - 1];
            }
            if r + 1 < n {
                sup[r] = -k[i];
            }
        }
        (sub, diag, sup)
    }

    /// `S u` on all nodes; entries at eliminated nodes are 0.
    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        let k = &self.face_conductance;
        let mut out = vec![0.0; u.len()];
        for i in self.unknowns() {
            let mut v = k[i] * (u[i] - u[i + 1]);
            if i > 0 {
                v += k[i - 1] * (u[i] - u[i - 1]);
            }
            out[i] = v;
        }
        out
    }

    /// `A u = M⁻¹ S u`, the discrete `−(a u_x)_x`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let cells = self.mesh.cell_widths();
        let mut out = self.apply_stiffness(u);
        for (o, h) in out.iter_mut().zip(cells) {
            *o /= h;
        }
        out
    }

    /// Mesh-weighted inner product `Σ h_i u_i w_i`.
    pub fn inner(&self, u: &[f64], w: &[f64]) -> f64 {
        mesh_inner(&self.mesh, u, w)
    }
}

pub fn mesh_inner(mesh: &Mesh, u: &[f64], w: &[f64]) -> f64 {
    mesh.cell_widths()
        .iter()
        .zip(u.iter().zip(w))
        .map(|(h, (a, b))| h * a * b)
        .sum()
}

/// Symmetric tridiagonal solve by `LDLᵀ` elimination; a nonpositive or
/// non-finite pivot means the step matrix is not SPD.
pub fn solve_symmetric_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut d = vec![0.0; n];
    let mut y = vec![0.0; n];
    for i in 0..n {
        let (pivot, carry) = if i == 0 {
            (diag[0], rhs[0])
        } else {
            let l = off[i - 1] / d[i - 1];
            (diag[i] - l * off[i - 1], rhs[i] - l * y[i - 1])
        };
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(LabError::NonSpdStep { row: i, pivot });
        }
        d[i] = pivot;
        y[i] = carry;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = y[i];
        if i + 1 < n {
            v -= off[i] * x[i + 1];
        }
        x[i] = v / d[i];
    }
    Ok(x)
}
