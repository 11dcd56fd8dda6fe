use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

/// Nodes `0 = x_0 < … < x_N = 1` with face midpoints and dual-cell widths.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
    faces: Vec<f64>,
    cells: Vec<f64>,
    grading_exponent: f64,
}

/// Graded mesh `x_i = (i/N)^p`, clustering at the degenerate end.
pub fn build_mesh(n: usize, grading_exponent: f64) -> Result<Mesh> {
    if n < 2 {
        return Err(LabError::OutOfRange(format!("N = {n} must be >= 2")));
    }
    if !(1.0..=4.0).contains(&grading_exponent) {
        return Err(LabError::OutOfRange(format!(
            "grading exponent {grading_exponent} must lie in [1, 4]"
        )));
    }
    let nodes = (0..=n)
        .map(|i| {
            if i == n {
                1.0
            } else {
                (i as f64 / n as f64).powf(grading_exponent)
            }
        })
        .collect();
    let mut mesh = Mesh::from_nodes(nodes)?;
    mesh.grading_exponent = grading_exponent;
    Ok(mesh)
}

impl Mesh {
    /// Arbitrary strictly increasing nodes from 0 to 1.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(LabError::OutOfRange("mesh needs at least three nodes".into()));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(LabError::OutOfRange("mesh must span [0, 1]".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LabError::OutOfRange("mesh nodes must increase strictly".into()));
        }
        let n = nodes.len() - 1;
        let faces = nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut cells = vec![0.0; n + 1];
        for i in 0..n {
            let half = 0.5 * (nodes[i + 1] - nodes[i]);
            cells[i] += half;
            cells[i + 1] += half;
        }
        Ok(Self {
            nodes,
            faces,
            cells,
            grading_exponent: f64::NAN,
        })
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    /// Dual-cell widths, i.e. trapezoid weights of the nodes.
    pub fn cell_widths(&self) -> &[f64] {
        &self.cells
    }

    /// `x_{i+1} − x_i`.
    pub fn spacing(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    /// `NaN` for meshes not built by [`build_mesh`].
    pub fn grading_exponent(&self) -> f64 {
        self.grading_exponent
    }
}

/// Condition imposed at the degenerate end `x = 0`; `x = 1` is always Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRegime {
    DirichletZero,
    ZeroFlux,
}

impl BoundaryRegime {
    /// Index of the first unknown node.
    pub fn first_unknown(self) -> usize {
        match self {
            BoundaryRegime::DirichletZero => 1,
            BoundaryRegime::ZeroFlux => 0,
        }
    }
}

impl std::fmt::Display for BoundaryRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundaryRegime::DirichletZero => "dirichlet_zero",
            BoundaryRegime::ZeroFlux => "zero_flux",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_examples() {
        assert_eq!(build_mesh(4, 1.0).unwrap().nodes(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(
            build_mesh(4, 2.0).unwrap().nodes(),
            &[0.0, 0.0625, 0.25, 0.5625, 1.0]
        );
        assert_eq!(build_mesh(2, 3.0).unwrap().nodes(), &[0.0, 0.125, 1.0]);
    }

    #[test]
    fn mesh_rejects_bad_input() {
        assert!(build_mesh(1, 1.0).is_err());
        assert!(build_mesh(8, 0.5).is_err());
        assert!(build_mesh(8, 4.5).is_err());
    }

    #[test]
    fn cells_sum_to_one() {
        let m = build_mesh(37, 2.3).unwrap();
        assert!((m.cell_widths().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(m.faces().len(), 37);
    }
}
